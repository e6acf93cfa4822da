//! Lattice sites, finitely supported potentials and the closed-form traces
//! that feed the Taylor data of the determinant at `z = 0`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer point of `Z^d`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticeSite(Vec<i64>);

impl LatticeSite {
    pub fn new(coords: Vec<i64>) -> Self {
        LatticeSite(coords)
    }

    pub fn origin(d: usize) -> Self {
        LatticeSite(vec![0; d])
    }

    /// `sign * e_axis`.
    pub fn unit(d: usize, axis: usize, sign: i64) -> Self {
        let mut c = vec![0; d];
        c[axis] = sign;
        LatticeSite(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn sub(&self, other: &LatticeSite) -> LatticeSite {
        LatticeSite(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> LatticeSite {
        LatticeSite(self.0.iter().map(|a| -a).collect())
    }

    pub fn l1_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    pub fn max_abs(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// Representative of the orbit under sign flips and coordinate
    /// permutations: absolute values sorted ascending.
    pub fn canonical(&self) -> LatticeSite {
        let mut c: Vec<i64> = self.0.iter().map(|c| c.abs()).collect();
        c.sort_unstable();
        LatticeSite(c)
    }

    pub(crate) fn neighbors(&self) -> impl Iterator<Item = LatticeSite> + '_ {
        (0..self.dim()).flat_map(move |axis| {
            [-1i64, 1].into_iter().map(move |step| {
                let mut c = self.0.clone();
                c[axis] += step;
                LatticeSite(c)
            })
        })
    }
}

impl fmt::Debug for LatticeSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Finitely supported complex potential on `Z^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    dimension: usize,
    entries: BTreeMap<LatticeSite, Complex64>,
}

impl Potential {
    pub fn empty(dimension: usize) -> Result<Self> {
        if dimension < 3 {
            return Err(Error::UnsupportedDimension(dimension));
        }
        Ok(Potential {
            dimension,
            entries: BTreeMap::new(),
        })
    }

    pub fn new<I>(dimension: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (LatticeSite, Complex64)>,
    {
        let mut pot = Potential::empty(dimension)?;
        for (site, value) in entries {
            if site.dim() != dimension {
                let found = site.dim();
                return Err(Error::SiteDimension {
                    site: site.0,
                    expected: dimension,
                    found,
                });
            }
            if !value.re.is_finite() || !value.im.is_finite() {
                return Err(Error::NonFiniteValue(site.0));
            }
            if pot.entries.contains_key(&site) {
                return Err(Error::DuplicateSite(site.0));
            }
            pot.entries.insert(site, value);
        }
        Ok(pot)
    }

    /// Single-site potential `v` at the origin.
    pub fn rank_one(dimension: usize, v: Complex64) -> Result<Self> {
        Potential::new(dimension, [(LatticeSite::origin(dimension), v)])
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn support_size(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LatticeSite, &Complex64)> {
        self.entries.iter()
    }

    pub fn sites(&self) -> impl Iterator<Item = &LatticeSite> {
        self.entries.keys()
    }

    pub fn get(&self, site: &LatticeSite) -> Complex64 {
        self.entries.get(site).copied().unwrap_or_default()
    }

    pub fn is_real(&self) -> bool {
        self.entries.values().all(|v| v.im == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest coordinate magnitude over the support.
    pub fn extent(&self) -> i64 {
        self.entries.keys().map(|s| s.max_abs()).max().unwrap_or(0)
    }

    /// Drops the smallest sites while the removed `l^p` mass stays within
    /// `eps`. Returns the truncated potential and the dropped mass.
    pub fn truncate(&self, p: f64, eps: f64) -> (Potential, f64) {
        let mut by_size: Vec<(&LatticeSite, &Complex64)> = self.entries.iter().collect();
        by_size.sort_by(|a, b| a.1.norm().total_cmp(&b.1.norm()));
        let budget = eps.powf(p);
        let mut dropped = 0.0;
        let mut keep = BTreeMap::new();
        let mut dropping = true;
        for (site, v) in by_size {
            let mass = v.norm().powf(p);
            if dropping && dropped + mass <= budget {
                dropped += mass;
            } else {
                dropping = false;
                keep.insert(site.clone(), *v);
            }
        }
        (
            Potential {
                dimension: self.dimension,
                entries: keep,
            },
            dropped.powf(1.0 / p),
        )
    }
}

/// `(sum |V_n|^p)^{1/p}`, or `sup |V_n|` for `p = inf`.
pub fn p_norm(v: &Potential, p: f64) -> f64 {
    if p.is_infinite() {
        return v.max_abs();
    }
    v.entries
        .values()
        .map(|x| x.norm().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

/// `Tr V^n`.
pub fn trace_power(v: &Potential, n: u32) -> Complex64 {
    v.entries.values().map(|x| x.powu(n)).sum()
}

/// `Tr(V^4 + 2 V H0 V H0 + 4 V^2 H0^2)` with `H0` the hopping-1/2 Laplacian.
pub fn trace_d4_combination(v: &Potential, d: usize) -> Complex64 {
    let quartic = trace_power(v, 4);
    let mut neighbor = Complex64::new(0.0, 0.0);
    for (site, value) in v.iter() {
        for nb in site.neighbors() {
            neighbor += value * v.get(&nb);
        }
    }
    quartic + 0.5 * neighbor + 2.0 * d as f64 * trace_power(v, 2)
}

/// Sparse vector over lattice sites.
type SiteVec = HashMap<LatticeSite, Complex64>;

fn apply_laplacian(x: &SiteVec) -> SiteVec {
    let mut out = SiteVec::with_capacity(x.len() * 4);
    for (site, value) in x {
        let half = 0.5 * value;
        for nb in site.neighbors() {
            *out.entry(nb).or_default() += half;
        }
    }
    out
}

fn apply_potential(v: &Potential, x: &SiteVec) -> SiteVec {
    x.iter()
        .filter_map(|(site, value)| v.entries.get(site).map(|w| (site.clone(), w * value)))
        .collect()
}

/// `d_n = (1/n) Tr(H^n - H0^n - n H0^{n-1} V)` for `2 <= n <= 6`.
///
/// Expands `(H0 + V)^n` into words and keeps those with at least two `V`
/// letters; the one-`V` words cancel against `n H0^{n-1} V` by cyclicity.
/// Each surviving word is rotated to start with `V` and its trace is the
/// sum of closed walks starting on the support.
pub fn dn_coefficient(v: &Potential, n: usize) -> Result<Complex64> {
    if !(2..=6).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "d_n is enumerated only for 2 <= n <= 6, got {n}"
        )));
    }
    let mut total = Complex64::new(0.0, 0.0);
    for word in 0u32..(1 << n) {
        if word.count_ones() < 2 {
            continue;
        }
        // Bit i set means letter i is V; rotate so letter 0 is V.
        let shift = word.trailing_zeros() as usize;
        let letters: Vec<bool> = (0..n).map(|i| word >> ((i + shift) % n) & 1 == 1).collect();
        for (site, value) in v.iter() {
            let mut x = SiteVec::new();
            x.insert(site.clone(), Complex64::new(1.0, 0.0));
            for &is_v in letters[1..].iter().rev() {
                x = if is_v {
                    apply_potential(v, &x)
                } else {
                    apply_laplacian(&x)
                };
                if x.is_empty() {
                    break;
                }
            }
            if let Some(back) = x.get(site) {
                total += value * back;
            }
        }
    }
    Ok(total / n as f64)
}

/// Closed-form Taylor coefficients `psi_2, psi_3, psi_4` of
/// `log D(z) = -psi_2 z^2 - psi_3 z^3 - psi_4 z^4 - ...`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PsiCoefficients {
    pub psi2: Complex64,
    pub psi3: Complex64,
    pub psi4: Complex64,
}

/// With `a = 2/d`: `psi_2 = (a^2/2) Tr V^2`, `psi_3 = (a^3/3) Tr V^3`,
/// `psi_4 = (a^4/4) Tr(V^4 + 2VH0VH0 + 4V^2H0^2) - 2 psi_2`.
///
/// The `-2 psi_2` in `psi_4` comes from `1/lambda^2 = a^2 z^2 (1 - 2 z^2 + ...)`;
/// see [`psi4_as_printed`] for the variant with `-psi_2`.
pub fn psi_coefficients(v: &Potential, d: usize) -> PsiCoefficients {
    let a = 2.0 / d as f64;
    let psi2 = a.powi(2) / 2.0 * trace_power(v, 2);
    let psi3 = a.powi(3) / 3.0 * trace_power(v, 3);
    let psi4 = a.powi(4) / 4.0 * trace_d4_combination(v, d) - 2.0 * psi2;
    PsiCoefficients { psi2, psi3, psi4 }
}

/// `(a^4/4) Tr(V^4 + 2VH0VH0 + 4V^2H0^2) - psi_2`, kept for diagnostics.
pub fn psi4_as_printed(v: &Potential, d: usize) -> Complex64 {
    let a = 2.0 / d as f64;
    let psi2 = a.powi(2) / 2.0 * trace_power(v, 2);
    a.powi(4) / 4.0 * trace_d4_combination(v, d) - psi2
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `psi_1 ..= psi_nmax` (index 0 holds `psi_1`) from the walk-enumerated
/// `d_k`, by expanding `-sum_k d_k lambda^{-k}` with
/// `1/lambda = a z / (1 + z^2)`.
pub fn psi_series(v: &Potential, n_max: usize) -> Result<Vec<Complex64>> {
    if n_max > 6 {
        return Err(Error::InvalidArgument(format!(
            "psi_n closed forms are available up to n = 6, got {n_max}"
        )));
    }
    let a = 2.0 / v.dimension() as f64;
    let dk: Vec<Complex64> = (2..=n_max.max(2))
        .map(|k| dn_coefficient(v, k))
        .collect::<Result<_>>()?;
    let mut psi = vec![Complex64::new(0.0, 0.0); n_max];
    for n in 2..=n_max {
        for k in 2..=n {
            if (n - k) % 2 != 0 {
                continue;
            }
            // [z^n] (z/(1+z^2))^k = [x^j] (1+x)^{-k}, x = z^2, j = (n-k)/2
            let j = ((n - k) / 2) as u64;
            let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
            let c = sign * binomial(k as u64 + j - 1, j);
            psi[n - 1] += a.powi(k as i32) * c * dk[k - 2];
        }
    }
    Ok(psi)
}
