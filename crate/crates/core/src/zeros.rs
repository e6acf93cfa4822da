//! Zeros of `D` inside `|z| < r`: winding count, Delves–Lyness moments,
//! Aberth roots of the moment polynomial and Newton refinement on `D`,
//! plus the Blaschke data built from them.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::determinant::{circle, DeterminantEngine};
use crate::error::{Error, Result};
use crate::spectral::{kappa_of_lambda, lambda_of_z};

type C64 = Complex64;

pub const MAX_ZEROS: usize = 20;
/// Refined zeros closer than this are one zero with summed multiplicity.
pub const CLUSTER_RADIUS: f64 = 1e-7;
/// Moment roots closer than this are refined together as a multiple zero.
const GROUP_RADIUS: f64 = 1e-4;
const RADIUS_NUDGE: f64 = 1e-3;
const REFINE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Zero {
    pub z: C64,
    pub multiplicity: usize,
    pub lambda: C64,
    pub kappa: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZeroSet {
    pub d: usize,
    pub r_used: f64,
    pub zeros: Vec<Zero>,
}

impl ZeroSet {
    pub fn empty(d: usize, r_used: f64) -> Self {
        ZeroSet {
            d,
            r_used,
            zeros: Vec::new(),
        }
    }

    /// Builds the set from disk points, deriving `lambda` and `kappa`.
    pub fn from_points(d: usize, r_used: f64, points: &[(C64, usize)]) -> Result<Self> {
        let mut zeros = points
            .iter()
            .map(|&(z, multiplicity)| {
                let lambda = lambda_of_z(z, d)?;
                Ok(Zero {
                    z,
                    multiplicity,
                    lambda,
                    kappa: kappa_of_lambda(lambda, d)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        zeros.sort_by(|a, b| {
            a.z.norm()
                .total_cmp(&b.z.norm())
                .then(a.z.arg().total_cmp(&b.z.arg()))
        });
        Ok(ZeroSet { d, r_used, zeros })
    }

    /// Number of zeros counted with multiplicity.
    pub fn count(&self) -> usize {
        self.zeros.iter().map(|z| z.multiplicity).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.zeros.is_empty()
    }

    /// `min |z_j|`, or `None` without zeros.
    pub fn r0(&self) -> Option<f64> {
        self.zeros.iter().map(|z| z.z.norm()).min_by(f64::total_cmp)
    }

    fn weighted<F: Fn(&Zero) -> f64>(&self, f: F) -> f64 {
        self.zeros.iter().map(|z| z.multiplicity as f64 * f(z)).sum()
    }

    pub fn sum_one_minus_abs(&self) -> f64 {
        self.weighted(|z| 1.0 - z.z.norm())
    }

    pub fn sum_abs_im_lambda(&self) -> f64 {
        self.weighted(|z| z.lambda.im.abs())
    }

    pub fn sum_abs_re_kappa(&self) -> f64 {
        self.weighted(|z| z.kappa.re.abs())
    }

    /// `sum (Re kappa_j + i Im lambda_j)`.
    pub fn eigen_sum(&self) -> C64 {
        self.zeros
            .iter()
            .map(|z| z.multiplicity as f64 * C64::new(z.kappa.re, z.lambda.im))
            .sum()
    }

    /// `sum [(k1 l1 - l2 k2) + i (l1 l2 + k1 k2)]` with `lambda = l1 + i l2`
    /// and `kappa = k1 + i k2`.
    pub fn eigen_product_sum(&self) -> C64 {
        self.zeros
            .iter()
            .map(|z| {
                let (l1, l2, k1, k2) = (z.lambda.re, z.lambda.im, z.kappa.re, z.kappa.im);
                z.multiplicity as f64 * C64::new(k1 * l1 - l2 * k2, l1 * l2 + k1 * k2)
            })
            .sum()
    }
}

/// `prod_j [(|z_j|/z_j)(z_j - z)/(1 - conj(z_j) z)]^{m_j}`.
pub fn blaschke_eval(zs: &ZeroSet, z: C64) -> C64 {
    zs.zeros.iter().fold(C64::new(1.0, 0.0), |acc, zero| {
        let a = zero.z;
        let factor = (a.norm() / a) * (a - z) / (1.0 - a.conj() * z);
        acc * factor.powu(zero.multiplicity as u32)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlaschkeCoeffs {
    pub b0: f64,
    /// `B_1..B_{n_max}`.
    pub bn: Vec<C64>,
}

impl BlaschkeCoeffs {
    /// `B_n` for `n >= 1`.
    pub fn get(&self, n: usize) -> C64 {
        self.bn[n - 1]
    }
}

/// `B_0 = sum log |z_j|` and `B_n = (1/n) sum (z_j^{-n} - conj(z_j)^n)`, so
/// that `log B(z) = B_0 - sum_n B_n z^n` near `z = 0`.
pub fn blaschke_coeffs(zs: &ZeroSet, n_max: usize) -> Result<BlaschkeCoeffs> {
    blaschke_coeffs_at_radius(zs, 1.0, n_max)
}

/// Coefficients for the radius-`r` Blaschke product with factors
/// `r (z_j - z) / (r^2 - conj(z_j) z)`: `B_0 = sum log(|z_j| / r)` and
/// `B_n = (1/n) sum (z_j^{-n} - conj(z_j)^n / r^{2n})`.
pub fn blaschke_coeffs_at_radius(zs: &ZeroSet, r: f64, n_max: usize) -> Result<BlaschkeCoeffs> {
    if n_max > 16 {
        return Err(Error::InvalidArgument(format!("n_max = {n_max} exceeds 16")));
    }
    let b0 = zs.weighted(|z| (z.z.norm() / r).ln());
    let bn = (1..=n_max)
        .map(|n| {
            let ni = n as i32;
            let r2n = r.powi(2 * ni);
            zs.zeros
                .iter()
                .map(|z| z.multiplicity as f64 * (z.z.powi(-ni) - z.z.conj().powi(ni) / r2n))
                .sum::<C64>()
                / n as f64
        })
        .collect();
    Ok(BlaschkeCoeffs { b0, bn })
}

/// Contour settings for counting and locating zeros.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeroLocator {
    /// Samples on the counting and moment circle.
    pub samples: usize,
}

impl Default for ZeroLocator {
    fn default() -> Self {
        ZeroLocator { samples: 1024 }
    }
}

impl ZeroLocator {
    pub fn new(samples: usize) -> Self {
        ZeroLocator { samples }
    }

    /// Winding number of `D` around `|z| = r`.
    pub fn count_zeros(&self, engine: &DeterminantEngine, r: f64) -> Result<usize> {
        Ok(self.count_with_radius(engine, r)?.0)
    }

    /// Winding count together with the radius actually used, which differs
    /// from `r` by the nudge when a zero sits on the first circle.
    pub fn count_with_radius(&self, engine: &DeterminantEngine, r: f64) -> Result<(usize, f64)> {
        let mut last = None;
        for radius in [r, r - RADIUS_NUDGE, r + RADIUS_NUDGE] {
            if !(radius > 0.0 && radius <= engine.radial_ceiling()) {
                continue;
            }
            match engine.winding(radius, self.samples) {
                Ok(w) => return Ok((round_winding(w)?, radius)),
                Err(e @ Error::ZeroOnPath(_)) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.unwrap_or(Error::RadialCeiling {
            modulus: r,
            ceiling: engine.radial_ceiling(),
        }))
    }

    pub fn locate_zeros(&self, engine: &DeterminantEngine, r: f64) -> Result<ZeroSet> {
        let d = engine.dimension();
        let (n, r_used) = self.count_with_radius(engine, r)?;
        if n == 0 {
            return Ok(ZeroSet::empty(d, r_used));
        }
        if n > MAX_ZEROS {
            return Err(Error::TooManyZeros { count: n, max: MAX_ZEROS });
        }
        let guesses = self.moment_roots(engine, r_used, n)?;
        let fine = engine.with_tol(engine.tol().min(REFINE_TOL))?;

        let mut refined: Vec<(C64, usize)> = Vec::new();
        for group in group_roots(&guesses, GROUP_RADIUS) {
            let m = group.len();
            let center = group.iter().sum::<C64>() / m as f64;
            let z = refine(&fine, center, m, r_used)?;
            refined.push((z, m));
        }
        let merged = merge_clusters(refined, CLUSTER_RADIUS);

        for &(z, m) in &merged {
            let (dv, dlog) = fine.d_and_log_derivative(z)?;
            let dprime = dlog.map(|g| (dv * g).norm()).unwrap_or(0.0);
            if dv.norm() > 1e-10 * dprime.max(1.0) {
                return Err(Error::Refinement(format!(
                    "|D| = {:.3e} at z = {z} (multiplicity {m}) after refinement",
                    dv.norm()
                )));
            }
        }
        let total: usize = merged.iter().map(|p| p.1).sum();
        if total != n {
            return Err(Error::Refinement(format!(
                "refined multiplicities sum to {total}, winding count is {n}"
            )));
        }
        ZeroSet::from_points(d, r_used, &merged)
    }

    /// Roots of the polynomial whose power sums are the contour moments
    /// `(1/2 pi i) int z^k D'/D dz`, for `k = 1..=n`.
    fn moment_roots(&self, engine: &DeterminantEngine, r: f64, n: usize) -> Result<Vec<C64>> {
        let m = self.samples;
        let (_, pts) = circle(r, m);
        let logder: Vec<C64> = pts
            .par_iter()
            .map(|&z| match engine.d_and_log_derivative(z)? {
                (_, Some(g)) => Ok(g),
                (_, None) => Err(Error::ZeroOnPath(z)),
            })
            .collect::<Result<_>>()?;
        // power sums of u_j = z_j / r keep the moments of unit size
        let power_sums: Vec<C64> = (1..=n)
            .map(|k| {
                pts.iter()
                    .zip(&logder)
                    .map(|(&z, &g)| (z / r).powu(k as u32) * z * g)
                    .sum::<C64>()
                    / m as f64
            })
            .collect();
        let coeffs = poly_from_power_sums(&power_sums);
        Ok(aberth(&coeffs).into_iter().map(|u| u * r).collect())
    }
}

fn round_winding(w: f64) -> Result<usize> {
    let k = w.round();
    if (w - k).abs() > 1e-3 || k < 0.0 {
        return Err(Error::NonIntegerWinding(w));
    }
    Ok(k as usize)
}

/// Monic polynomial (coefficients low to high) with the given power sums
/// `p_1..p_n`, via Newton's identities.
pub(crate) fn poly_from_power_sums(p: &[C64]) -> Vec<C64> {
    let n = p.len();
    let mut e = vec![C64::new(0.0, 0.0); n + 1];
    e[0] = C64::new(1.0, 0.0);
    for k in 1..=n {
        let mut s = C64::new(0.0, 0.0);
        for i in 1..=k {
            let term = e[k - i] * p[i - 1];
            if i % 2 == 1 {
                s += term;
            } else {
                s -= term;
            }
        }
        e[k] = s / k as f64;
    }
    // p(u) = sum_k (-1)^k e_k u^{n-k}
    let mut coeffs = vec![C64::new(0.0, 0.0); n + 1];
    for (k, ek) in e.iter().enumerate() {
        coeffs[n - k] = if k % 2 == 0 { *ek } else { -ek };
    }
    coeffs
}

fn horner(coeffs: &[C64], z: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All roots of a monic polynomial (coefficients low to high) by Aberth's
/// simultaneous iteration.
pub(crate) fn aberth(coeffs: &[C64]) -> Vec<C64> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let center = -coeffs[n - 1] / n as f64;
    let radius = coeffs[0].norm().powf(1.0 / n as f64).max(0.1);
    let mut roots: Vec<C64> = (0..n)
        .map(|k| center + C64::from_polar(radius, 2.0 * PI * k as f64 / n as f64 + 0.4))
        .collect();
    for _ in 0..2000 {
        let mut worst = 0.0f64;
        for i in 0..n {
            let (p, dp) = horner(coeffs, roots[i]);
            if p == C64::new(0.0, 0.0) {
                continue;
            }
            let ratio = p / dp;
            let repulsion: C64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| (roots[i] - roots[j]).inv())
                .sum();
            let step = ratio / (1.0 - ratio * repulsion);
            if step.is_finite() {
                roots[i] -= step;
                worst = worst.max(step.norm() / roots[i].norm().max(1.0));
            }
        }
        if worst < 1e-15 {
            break;
        }
    }
    roots
}

/// Single-linkage groups of points closer than `radius`.
fn group_roots(points: &[C64], radius: f64) -> Vec<Vec<C64>> {
    let n = points.len();
    let mut label: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if (points[i] - points[j]).norm() < radius {
                let (a, b) = (label[i], label[j]);
                for l in label.iter_mut() {
                    if *l == b {
                        *l = a;
                    }
                }
            }
        }
    }
    let mut ids: Vec<usize> = label.clone();
    ids.sort();
    ids.dedup();
    ids.into_iter()
        .map(|id| (0..n).filter(|&i| label[i] == id).map(|i| points[i]).collect())
        .collect()
}

fn merge_clusters(points: Vec<(C64, usize)>, radius: f64) -> Vec<(C64, usize)> {
    let zs: Vec<C64> = points.iter().map(|p| p.0).collect();
    group_roots(&zs, radius)
        .into_iter()
        .map(|group| {
            let members: Vec<&(C64, usize)> = points.iter().filter(|p| group.contains(&p.0)).collect();
            let m: usize = members.iter().map(|p| p.1).sum();
            let z = members.iter().map(|p| p.0 * p.1 as f64).sum::<C64>() / m as f64;
            (z, m)
        })
        .collect()
}

/// Newton iteration `z <- z - m D/D'` for a zero of multiplicity `m`.
fn refine(engine: &DeterminantEngine, start: C64, m: usize, r: f64) -> Result<C64> {
    let mut z = start;
    for _ in 0..100 {
        let (dv, dlog) = engine.d_and_log_derivative(z)?;
        if dv == C64::new(0.0, 0.0) {
            return Ok(z);
        }
        let Some(g) = dlog else {
            return Ok(z);
        };
        let step = m as f64 / g;
        if !step.is_finite() {
            return Err(Error::Refinement(format!("non-finite Newton step at z = {z}")));
        }
        z -= step;
        if z.norm() >= r {
            return Err(Error::Refinement(format!("Newton iterate left the disk |z| < {r}: z = {z}")));
        }
        if step.norm() <= 4.0 * f64::EPSILON * z.norm().max(1e-3) {
            return Ok(z);
        }
    }
    Ok(z)
}
