//! Free lattice resolvent kernel `G(n; lambda) = (Delta - lambda)^{-1}(n, 0)`
//! and its `lambda`-derivative, evaluated by nested trapezoid rules on the
//! torus with an `N` versus `2N` error estimate.

pub mod strategy;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::LatticeSite;
use crate::spectral::{band_distance, on_band};

pub use strategy::{registry, GreenStrategy, GridJob, Sums};

/// Entries cached beyond this count are dropped wholesale.
const CACHE_LIMIT: usize = 1 << 18;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSettings {
    /// Smallest admissible distance from `lambda` to `[-d, d]`.
    pub band_floor: f64,
    /// Points per dimension at which doubling starts.
    pub min_points: usize,
    /// Cap on points per sampled dimension; `None` picks a budget from the
    /// number of sampled dimensions.
    pub max_points: Option<usize>,
}

impl Default for KernelSettings {
    fn default() -> Self {
        KernelSettings {
            band_floor: 1e-3,
            min_points: 8,
            max_points: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GreenRequest {
    pub diff: LatticeSite,
    pub lambda: Complex64,
    pub d: usize,
    pub tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GreenEntry {
    pub value: Complex64,
    pub err: f64,
    pub derivative: Option<Complex64>,
    pub derivative_err: Option<f64>,
    /// Points per sampled dimension of the returned (finer) rule.
    pub points: usize,
}

/// Kernel values on canonical diffs at one `lambda`.
#[derive(Clone, Debug, PartialEq)]
pub struct GreenTable {
    pub lambda: Complex64,
    pub d: usize,
    pub entries: BTreeMap<LatticeSite, GreenEntry>,
    pub quadrature_points: usize,
}

impl GreenTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Looks up any diff through its symmetry class.
    pub fn get(&self, diff: &LatticeSite) -> Option<&GreenEntry> {
        self.entries.get(&diff.canonical())
    }

    pub fn value(&self, diff: &LatticeSite) -> Complex64 {
        self.get(diff).map(|e| e.value).unwrap_or_default()
    }

    pub fn derivative(&self, diff: &LatticeSite) -> Option<Complex64> {
        self.get(diff).and_then(|e| e.derivative)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct CacheKey {
    diff: LatticeSite,
    lambda: (u64, u64),
    tol: u64,
    with_derivative: bool,
}

/// Quadrature driver around a [`GreenStrategy`], with a value cache.
///
/// Cached entries are keyed by the canonical diff, `lambda`, tolerance and
/// derivative flag; the points per dimension follow deterministically from
/// those, so concurrent recomputation yields identical values.
#[derive(Debug)]
pub struct GreenKernel {
    strategy: Arc<dyn GreenStrategy>,
    settings: KernelSettings,
    cache: Mutex<HashMap<CacheKey, GreenEntry>>,
}

impl GreenKernel {
    pub fn new(strategy: Arc<dyn GreenStrategy>, settings: KernelSettings) -> Self {
        GreenKernel {
            strategy,
            settings,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn by_name(name: &str, settings: KernelSettings) -> Result<Self> {
        Ok(GreenKernel::new(registry().create(name)?, settings))
    }

    pub fn strategy_name(&self) -> &'static str {
        self.strategy.name()
    }

    pub fn settings(&self) -> KernelSettings {
        self.settings
    }

    fn max_points(&self, d: usize) -> usize {
        if let Some(cap) = self.settings.max_points {
            return cap;
        }
        let m = self.strategy.grid_dims(d) as i32;
        // about 2^24 folded points on the finest grid
        let budget = 2f64.powf(24.0 / m as f64).floor() as usize * 2;
        budget.min(4096).next_power_of_two().min(4096).max(self.settings.min_points)
    }

    fn check_lambda(&self, lambda: Complex64, d: usize) -> Result<()> {
        if on_band(lambda, d) {
            return Err(Error::OnBand(lambda));
        }
        let distance = band_distance(lambda, d);
        if distance < self.settings.band_floor {
            return Err(Error::TooCloseToBand {
                lambda,
                distance,
                floor: self.settings.band_floor,
            });
        }
        Ok(())
    }

    pub fn green_entry(&self, req: &GreenRequest) -> Result<(Complex64, f64)> {
        let table = self.table(std::slice::from_ref(&req.diff), req.lambda, req.d, req.tol, false)?;
        let e = table.get(&req.diff).expect("requested diff present");
        Ok((e.value, e.err))
    }

    pub fn green_derivative_entry(&self, req: &GreenRequest) -> Result<(Complex64, f64)> {
        let table = self.table(std::slice::from_ref(&req.diff), req.lambda, req.d, req.tol, true)?;
        let e = table.get(&req.diff).expect("requested diff present");
        Ok((e.derivative.unwrap(), e.derivative_err.unwrap()))
    }

    /// Kernel values for every requested diff, deduplicated by symmetry.
    pub fn green_table(
        &self,
        diffs: &[LatticeSite],
        lambda: Complex64,
        d: usize,
        tol: f64,
    ) -> Result<GreenTable> {
        self.table(diffs, lambda, d, tol, false)
    }

    pub fn table(
        &self,
        diffs: &[LatticeSite],
        lambda: Complex64,
        d: usize,
        tol: f64,
        with_derivative: bool,
    ) -> Result<GreenTable> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        if let Some(bad) = diffs.iter().find(|s| s.dim() != d) {
            return Err(Error::SiteDimension {
                site: bad.coords().to_vec(),
                expected: d,
                found: bad.dim(),
            });
        }
        let canonical: BTreeSet<LatticeSite> = diffs.iter().map(LatticeSite::canonical).collect();
        let mut table = GreenTable {
            lambda,
            d,
            entries: BTreeMap::new(),
            quadrature_points: 0,
        };
        if canonical.is_empty() {
            return Ok(table);
        }
        self.check_lambda(lambda, d)?;

        let key = |diff: &LatticeSite| CacheKey {
            diff: diff.clone(),
            lambda: (lambda.re.to_bits(), lambda.im.to_bits()),
            tol: tol.to_bits(),
            with_derivative,
        };
        let mut missing = Vec::new();
        {
            let cache = self.cache.lock().unwrap();
            for diff in &canonical {
                match cache.get(&key(diff)) {
                    Some(entry) => {
                        table.entries.insert(diff.clone(), *entry);
                    }
                    None => missing.push(diff.clone()),
                }
            }
        }
        if !missing.is_empty() {
            let fresh = self.integrate(&missing, lambda, d, tol, with_derivative)?;
            let mut cache = self.cache.lock().unwrap();
            if cache.len() > CACHE_LIMIT {
                cache.clear();
            }
            for (diff, entry) in missing.into_iter().zip(fresh) {
                cache.insert(key(&diff), entry);
                table.entries.insert(diff, entry);
            }
        }
        table.quadrature_points = table.entries.values().map(|e| e.points).max().unwrap_or(0);
        Ok(table)
    }

    fn integrate(
        &self,
        diffs: &[LatticeSite],
        lambda: Complex64,
        d: usize,
        tol: f64,
        with_derivative: bool,
    ) -> Result<Vec<GreenEntry>> {
        let strategy = &self.strategy;
        let m = strategy.grid_dims(d) as i32;
        let job = GridJob {
            d,
            lambda,
            diffs,
            with_derivative,
        };
        let max_points = self.max_points(d);
        // resolve the largest sampled frequency well before comparing levels
        let freq = strategy.max_sampled_frequency(diffs).max(0) as usize;
        let mut points = self.settings.min_points.max((4 * freq + 8).next_power_of_two());

        let mut sums = vec![Sums::default(); diffs.len()];
        strategy.accumulate(&job, points, false, &mut sums);
        let mut coarse = normalize(&sums, points, m);
        loop {
            let fine_points = 2 * points;
            if fine_points > max_points {
                return Err(Error::QuadratureNotConverged {
                    lambda,
                    tol,
                    max_points,
                    discrepancy: f64::INFINITY,
                });
            }
            strategy.accumulate(&job, fine_points, true, &mut sums);
            let fine = normalize(&sums, fine_points, m);
            let mut worst = 0.0f64;
            let entries: Vec<GreenEntry> = coarse
                .iter()
                .zip(&fine)
                .map(|(c, f)| {
                    let err = (c.value - f.value).norm();
                    worst = worst.max(err);
                    let (derivative, derivative_err) = if with_derivative {
                        let e = (c.derivative - f.derivative).norm();
                        worst = worst.max(e);
                        (Some(f.derivative), Some(e))
                    } else {
                        (None, None)
                    };
                    GreenEntry {
                        value: f.value,
                        err,
                        derivative,
                        derivative_err,
                        points: fine_points,
                    }
                })
                .collect();
            if worst <= 0.5 * tol {
                return Ok(entries);
            }
            if 2 * fine_points > max_points {
                return Err(Error::QuadratureNotConverged {
                    lambda,
                    tol,
                    max_points,
                    discrepancy: worst,
                });
            }
            coarse = fine;
            points = fine_points;
        }
    }
}

impl Default for GreenKernel {
    fn default() -> Self {
        GreenKernel::by_name(registry().default_name(), KernelSettings::default())
            .expect("default strategy registered")
    }
}

fn normalize(sums: &[Sums], points: usize, m: i32) -> Vec<Sums> {
    let scale = (points as f64).powi(m).recip();
    sums.iter()
        .map(|s| Sums {
            value: s.value * scale,
            derivative: s.derivative * scale,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn site(v: &[i64]) -> LatticeSite {
        LatticeSite::new(v.to_vec())
    }

    fn req(diff: &[i64], lambda: Complex64) -> GreenRequest {
        GreenRequest {
            diff: site(diff),
            lambda,
            d: 3,
            tol: 1e-10,
        }
    }

    #[test]
    fn diagonal_entry_at_ten() {
        let k = GreenKernel::default();
        let (g, err) = k.green_entry(&req(&[0, 0, 0], c(10.0, 0.0))).unwrap();
        assert!((g - c(-0.1015563, 0.0)).norm() <= 1e-5);
        assert!(err <= 1e-10);
    }

    #[test]
    fn leading_neumann_term_far_away() {
        let k = GreenKernel::default();
        let lambda = c(1e6, 0.0);
        let (g, _) = k.green_entry(&req(&[0, 0, 0], lambda)).unwrap();
        assert!(((g - (-1.0 / lambda)) / g).norm() <= 1e-9);
    }

    #[test]
    fn symmetry_classes_share_values() {
        let k = GreenKernel::default();
        let lambda = c(3.4, 0.7);
        let (a, _) = k.green_entry(&req(&[1, 0, 0], lambda)).unwrap();
        let (b, _) = k.green_entry(&req(&[0, -1, 0], lambda)).unwrap();
        assert_eq!(a, b);
        let (da, _) = k.green_derivative_entry(&req(&[1, 0, 0], lambda)).unwrap();
        let (db, _) = k.green_derivative_entry(&req(&[-1, 0, 0], lambda)).unwrap();
        assert_eq!(da, db);
    }

    #[test]
    fn derivative_at_ten() {
        let k = GreenKernel::default();
        let (g, _) = k.green_derivative_entry(&req(&[0, 0, 0], c(10.0, 0.0))).unwrap();
        assert!((g - c(0.010478, 0.0)).norm() <= 1e-5);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let k = GreenKernel::default();
        for &(lambda, diff) in &[
            (c(10.0, 0.0), [0, 0, 0]),
            (c(3.2, 0.5), [1, 0, 0]),
            (c(-0.5, 1.0), [1, 2, 0]),
            (c(4.0, -2.0), [2, 1, 1]),
        ] {
            let h = 1e-4 * lambda.norm();
            let (dg, _) = k.green_derivative_entry(&req(&diff, lambda)).unwrap();
            let (gp, _) = k.green_entry(&req(&diff, lambda + h)).unwrap();
            let (gm, _) = k.green_entry(&req(&diff, lambda - h)).unwrap();
            let fd = (gp - gm) / (2.0 * h);
            assert!((dg - fd).norm() <= 1e-6, "{lambda} {diff:?}: {dg} vs {fd}");
        }
    }

    #[test]
    fn table_deduplicates_by_symmetry() {
        let k = GreenKernel::default();
        let t = k
            .green_table(&[site(&[0, 0, 0]), site(&[1, 0, 0])], c(10.0, 0.0), 3, 1e-8)
            .unwrap();
        assert_eq!(t.len(), 2);
        let t = k
            .green_table(
                &[site(&[1, 0, 0]), site(&[-1, 0, 0]), site(&[0, 1, 0])],
                c(10.0, 0.0),
                3,
                1e-8,
            )
            .unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.entries.values().all(|e| e.err <= 1e-8));
        let empty = k.green_table(&[], c(10.0, 0.0), 3, 1e-8).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn near_band_is_rejected() {
        let k = GreenKernel::default();
        let err = k.green_entry(&req(&[0, 0, 0], c(3.0005, 0.0))).unwrap_err();
        assert!(matches!(err, Error::TooCloseToBand { .. }));
        let err = k.green_entry(&req(&[0, 0, 0], c(1.0, 0.0))).unwrap_err();
        assert!(matches!(err, Error::OnBand(_)));
    }

    #[test]
    fn point_cap_surfaces_as_error() {
        let k = GreenKernel::by_name(
            "axis-reduced",
            KernelSettings {
                max_points: Some(32),
                ..KernelSettings::default()
            },
        )
        .unwrap();
        let err = k.green_entry(&req(&[0, 0, 0], c(3.01, 0.0))).unwrap_err();
        assert!(matches!(err, Error::QuadratureNotConverged { .. }));
    }

    #[test]
    fn strategies_agree() {
        let reduced = GreenKernel::by_name("axis-reduced", KernelSettings::default()).unwrap();
        let full = GreenKernel::by_name("torus-trapezoid", KernelSettings::default()).unwrap();
        for lambda in [c(5.0, 0.0), c(1.0, 2.0), c(-3.5, -0.5)] {
            for diff in [[0, 0, 0], [1, 0, 0], [1, 1, 0], [2, 0, 1]] {
                let a = reduced.green_entry(&req(&diff, lambda)).unwrap().0;
                let b = full.green_entry(&req(&diff, lambda)).unwrap().0;
                assert!((a - b).norm() < 1e-9, "{lambda} {diff:?}");
            }
        }
    }
}
