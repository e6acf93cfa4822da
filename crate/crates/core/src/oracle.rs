//! Finite-box truncation of `H = Delta + V` with zero Dirichlet walls, dense
//! eigenvalues with a residual certificate, and matching against the zeros
//! of `D`.

use std::fmt::Debug;
use std::sync::{Arc, OnceLock};

use faer::{Mat, Side};
use num_complex::Complex64;
use serde::Serialize;

use crate::determinant::DenseMatrix;
use crate::error::{Error, Result};
use crate::lattice::{LatticeSite, Potential};
use crate::registry::Registry;
use crate::spectral::{band_distance, z_of_lambda};
use crate::zeros::ZeroSet;

type C64 = Complex64;

pub const MAX_BOX_SITES: usize = 4096;
pub const RESIDUAL_BOUND: f64 = 1e-8;

/// `H` restricted to the box `[-L, L]^d`, kept in sparse form.
#[derive(Clone, Debug)]
pub struct BoxHamiltonian {
    pub half_width: usize,
    pub d: usize,
    pub sites: Vec<LatticeSite>,
    pub diagonal: Vec<C64>,
    /// Index pairs `(i, j)`, `i < j`, of nearest neighbours inside the box.
    pub bonds: Vec<(usize, usize)>,
}

impl BoxHamiltonian {
    pub fn size(&self) -> usize {
        self.sites.len()
    }

    pub fn is_real(&self) -> bool {
        self.diagonal.iter().all(|v| v.im == 0.0)
    }

    /// The full matrix with `1/2` on every bond and `V` on the diagonal.
    pub fn matrix(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.size());
        for (i, &v) in self.diagonal.iter().enumerate() {
            m.set(i, i, v);
        }
        for &(i, j) in &self.bonds {
            m.set(i, j, C64::new(0.5, 0.0));
            m.set(j, i, C64::new(0.5, 0.0));
        }
        m
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y: Vec<C64> = self.diagonal.iter().zip(x).map(|(v, xi)| v * xi).collect();
        for &(i, j) in &self.bonds {
            y[i] += 0.5 * x[j];
            y[j] += 0.5 * x[i];
        }
        y
    }

    /// `||(H - lambda) v|| / ||v||`.
    pub fn residual(&self, lambda: C64, v: &[C64]) -> f64 {
        let hv = self.apply(v);
        let num: f64 = hv.iter().zip(v).map(|(a, b)| (a - lambda * b).norm_sqr()).sum();
        let den: f64 = v.iter().map(|b| b.norm_sqr()).sum();
        (num / den).sqrt()
    }
}

pub fn build_truncated_hamiltonian(v: &Potential, half_width: usize) -> Result<BoxHamiltonian> {
    let d = v.dimension();
    let required = v.extent() as usize + 1;
    if !v.is_empty() && half_width < required {
        return Err(Error::BoxTooSmall { half_width, required });
    }
    let side = 2 * half_width + 1;
    let size = side.checked_pow(d as u32).unwrap_or(usize::MAX);
    if size > MAX_BOX_SITES {
        return Err(Error::BoxTooLarge {
            half_width,
            size,
            cap: MAX_BOX_SITES,
        });
    }
    let l = half_width as i64;
    let index = |coords: &[i64]| -> usize {
        coords
            .iter()
            .fold(0usize, |acc, &c| acc * side + (c + l) as usize)
    };
    let mut sites = Vec::with_capacity(size);
    let mut diagonal = Vec::with_capacity(size);
    let mut bonds = Vec::new();
    for flat in 0..size {
        let mut rest = flat;
        let mut coords = vec![0i64; d];
        for axis in (0..d).rev() {
            coords[axis] = (rest % side) as i64 - l;
            rest /= side;
        }
        for axis in 0..d {
            if coords[axis] < l {
                let mut next = coords.clone();
                next[axis] += 1;
                bonds.push((flat, index(&next)));
            }
        }
        let site = LatticeSite::new(coords);
        diagonal.push(v.get(&site));
        sites.push(site);
    }
    Ok(BoxHamiltonian {
        half_width,
        d,
        sites,
        diagonal,
        bonds,
    })
}

/// A dense eigensolver returning eigenpairs `(lambda, v)` for the eigenvalues
/// that `keep` accepts.
pub trait EigenStrategy: Send + Sync + Debug {
    fn name(&self) -> &'static str;

    fn supports(&self, h: &BoxHamiltonian) -> bool;

    fn eigenpairs(&self, h: &BoxHamiltonian, keep: &dyn Fn(C64) -> bool) -> Result<Vec<(C64, Vec<C64>)>>;
}

pub fn eigen_registry() -> &'static Registry<dyn EigenStrategy> {
    static REG: OnceLock<Registry<dyn EigenStrategy>> = OnceLock::new();
    REG.get_or_init(|| {
        Registry::<dyn EigenStrategy>::new("eigen")
            .register("dense-hermitian", || Arc::new(DenseHermitian))
            .register("dense-general", || Arc::new(DenseGeneral))
    })
}

/// Resolves `auto` to the symmetric solver for real boxes and the general
/// one otherwise.
pub fn eigen_strategy_for(name: &str, h: &BoxHamiltonian) -> Result<Arc<dyn EigenStrategy>> {
    let name = match name {
        "auto" if h.is_real() => "dense-hermitian",
        "auto" => "dense-general",
        other => other,
    };
    let s = eigen_registry().create(name)?;
    if !s.supports(h) {
        return Err(Error::Eigensolver(format!("`{}` cannot handle a complex potential", s.name())));
    }
    Ok(s)
}

/// Real symmetric tridiagonal reduction and QR via `faer`.
#[derive(Debug)]
pub struct DenseHermitian;

impl EigenStrategy for DenseHermitian {
    fn name(&self) -> &'static str {
        "dense-hermitian"
    }

    fn supports(&self, h: &BoxHamiltonian) -> bool {
        h.is_real()
    }

    fn eigenpairs(&self, h: &BoxHamiltonian, keep: &dyn Fn(C64) -> bool) -> Result<Vec<(C64, Vec<C64>)>> {
        let n = h.size();
        let mut m = Mat::<f64>::zeros(n, n);
        for (i, v) in h.diagonal.iter().enumerate() {
            m[(i, i)] = v.re;
        }
        for &(i, j) in &h.bonds {
            m[(i, j)] = 0.5;
            m[(j, i)] = 0.5;
        }
        let evd = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let s = evd.S().column_vector();
        let u = evd.U();
        Ok((0..n)
            .filter(|&k| keep(C64::new(s[k], 0.0)))
            .map(|k| {
                let vec = (0..n).map(|i| C64::new(u[(i, k)], 0.0)).collect();
                (C64::new(s[k], 0.0), vec)
            })
            .collect())
    }
}

/// Hessenberg reduction and shifted QR on the complex matrix via `faer`.
#[derive(Debug)]
pub struct DenseGeneral;

impl EigenStrategy for DenseGeneral {
    fn name(&self) -> &'static str {
        "dense-general"
    }

    fn supports(&self, _: &BoxHamiltonian) -> bool {
        true
    }

    fn eigenpairs(&self, h: &BoxHamiltonian, keep: &dyn Fn(C64) -> bool) -> Result<Vec<(C64, Vec<C64>)>> {
        let n = h.size();
        let mut m = Mat::<C64>::zeros(n, n);
        for (i, v) in h.diagonal.iter().enumerate() {
            m[(i, i)] = *v;
        }
        for &(i, j) in &h.bonds {
            m[(i, j)] = C64::new(0.5, 0.0);
            m[(j, i)] = C64::new(0.5, 0.0);
        }
        let evd = m.eigen().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let s = evd.S().column_vector();
        let u = evd.U();
        Ok((0..n)
            .filter(|&k| keep(s[k]))
            .map(|k| (s[k], (0..n).map(|i| u[(i, k)]).collect()))
            .collect())
    }
}

/// Box eigenvalues farther than `band_margin` from `[-d, d]`, each with a
/// passing residual certificate, sorted by decreasing modulus.
pub fn discrete_eigenvalues(
    v: &Potential,
    half_width: usize,
    band_margin: f64,
    strategy: &str,
) -> Result<Vec<C64>> {
    if !(band_margin > 0.0) {
        return Err(Error::InvalidArgument(format!("band margin must be positive, got {band_margin}")));
    }
    let h = build_truncated_hamiltonian(v, half_width)?;
    if v.is_empty() {
        return Ok(Vec::new());
    }
    let d = h.d;
    let solver = eigen_strategy_for(strategy, &h)?;
    let pairs = solver.eigenpairs(&h, &|l| band_distance(l, d) > band_margin)?;
    let mut out = Vec::with_capacity(pairs.len());
    for (lambda, vec) in pairs {
        let residual = h.residual(lambda, &vec);
        if !(residual <= RESIDUAL_BOUND) {
            return Err(Error::ResidualCheck { lambda, residual });
        }
        out.push(if h.is_real() { C64::new(lambda.re, 0.0) } else { lambda });
    }
    out.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    #[serde(rename = "L")]
    pub half_width: usize,
    pub n_oracle: usize,
    pub n_determinant: usize,
    pub n_matched: usize,
    pub max_abs_error: f64,
    /// Oracle eigenvalues that were nearest to more than one determinant value.
    pub conflicts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Errors do not increase over the final two increments of `L`.
    pub monotone: bool,
}

/// Greedy nearest matching; returns `(matched pairs, largest distance, conflicts)`.
pub fn greedy_match(det: &[C64], oracle: &[C64]) -> (usize, f64, usize) {
    let mut pairs: Vec<(f64, usize, usize)> = det
        .iter()
        .enumerate()
        .flat_map(|(i, a)| oracle.iter().enumerate().map(move |(j, b)| ((a - b).norm(), i, j)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut used_det = vec![false; det.len()];
    let mut used_oracle = vec![false; oracle.len()];
    let mut matched = 0;
    let mut worst = 0.0f64;
    for (dist, i, j) in pairs {
        if !used_det[i] && !used_oracle[j] {
            used_det[i] = true;
            used_oracle[j] = true;
            matched += 1;
            worst = worst.max(dist);
        }
    }
    let nearest: Vec<Option<usize>> = det
        .iter()
        .map(|a| {
            oracle
                .iter()
                .enumerate()
                .min_by(|x, y| (a - x.1).norm().total_cmp(&(a - y.1).norm()))
                .map(|(j, _)| j)
        })
        .collect();
    let conflicts = (0..oracle.len())
        .filter(|&j| nearest.iter().filter(|n| **n == Some(j)).count() > 1)
        .count();
    (matched, worst, conflicts)
}

/// Compares box eigenvalues for each half-width with the eigenvalues
/// `lambda_j` of the located zeros.
pub fn cross_validate(
    v: &Potential,
    half_widths: &[usize],
    zeros: &ZeroSet,
    band_margin: f64,
    strategy: &str,
) -> Result<ConvergenceTable> {
    let d = v.dimension();
    let det: Vec<C64> = zeros
        .zeros
        .iter()
        .filter(|z| band_distance(z.lambda, d) > band_margin)
        .flat_map(|z| std::iter::repeat_n(z.lambda, z.multiplicity))
        .collect();
    let mut rows = Vec::new();
    if v.is_empty() && det.is_empty() {
        return Ok(ConvergenceTable { rows, monotone: true });
    }
    for &l in half_widths {
        let oracle: Vec<C64> = discrete_eigenvalues(v, l, band_margin, strategy)?
            .into_iter()
            .filter(|&lam| z_of_lambda(lam, d).map(|z| z.norm() < zeros.r_used).unwrap_or(false))
            .collect();
        let (n_matched, max_abs_error, conflicts) = greedy_match(&det, &oracle);
        rows.push(ConvergenceRow {
            half_width: l,
            n_oracle: oracle.len(),
            n_determinant: det.len(),
            n_matched,
            max_abs_error,
            conflicts,
        });
    }
    if let Some(last) = rows.last() {
        if last.n_oracle != last.n_determinant {
            return Err(Error::CountMismatch {
                half_width: last.half_width,
                oracle: last.n_oracle,
                determinant: last.n_determinant,
            });
        }
    }
    let tail = &rows[rows.len().saturating_sub(3)..];
    let monotone = tail
        .windows(2)
        .all(|w| w[1].max_abs_error <= w[0].max_abs_error + MONOTONE_SLACK);
    Ok(ConvergenceTable { rows, monotone })
}

/// Differences below the refinement accuracy of the determinant zeros do not
/// count as increases.
pub const MONOTONE_SLACK: f64 = 1e-9;
