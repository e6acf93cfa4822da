//! Birman–Schwinger matrix on the support of `V`, the regularized
//! determinant `D(z) = det2(I + Y0(lambda(z)))`, branch tracking of `log D`,
//! Taylor data at `z = 0` and circle samples of `log |D|`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::green::GreenKernel;
use crate::lattice::{LatticeSite, Potential};
use crate::spectral::{dlambda_dz, lambda_of_z};

type C64 = Complex64;

/// Smallest `|D|` accepted on a tracked path.
pub const PATH_ZERO_FLOOR: f64 = 1e-13;
/// Smallest `|D|` accepted on a sampling circle.
pub const CIRCLE_ZERO_FLOOR: f64 = 1e-12;
const MAX_BISECTIONS: u32 = 40;

/// Dense row-major square matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DenseMatrix {
    pub n: usize,
    pub data: Vec<C64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let n = rows.len();
        let mut m = DenseMatrix::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix must be square");
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.n + j] = v;
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn conj_transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }
}

/// LU factorization `P A = L U` with partial pivoting, stored in place.
struct Lu {
    n: usize,
    lu: Vec<C64>,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    fn factor(mut a: Vec<C64>, n: usize) -> Lu {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a[i * n + k].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                a[i * n + k] = f;
                if f != C64::new(0.0, 0.0) {
                    for j in k + 1..n {
                        let u = a[k * n + j];
                        a[i * n + j] -= f * u;
                    }
                }
            }
        }
        Lu {
            n,
            lu: a,
            perm,
            sign,
            singular,
        }
    }

    fn det(&self) -> C64 {
        if self.singular {
            return C64::new(0.0, 0.0);
        }
        (0..self.n).fold(C64::new(self.sign, 0.0), |acc, i| acc * self.lu[i * self.n + i])
    }

    fn solve_in_place(&self, b: &mut [C64]) {
        let n = self.n;
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let t = self.lu[i * n + j] * x[j];
                x[i] -= t;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = self.lu[i * n + j] * x[j];
                x[i] -= t;
            }
            x[i] /= self.lu[i * n + i];
        }
        b.copy_from_slice(&x);
    }
}

fn identity_plus(a: &DenseMatrix) -> Vec<C64> {
    let mut m = a.data.clone();
    for i in 0..a.n {
        m[i * a.n + i] += 1.0;
    }
    m
}

/// `det(I + A) e^{-Tr A}` by one LU pass.
pub fn det2(a: &DenseMatrix) -> C64 {
    let lu = Lu::factor(identity_plus(a), a.n);
    lu.det() * (-a.trace()).exp()
}

/// `det2(I + A)` together with `d/dt log det2(I + A(t)) = Tr[(I+A)^{-1} A'] - Tr A'`.
fn det2_with_log_derivative(a: &DenseMatrix, da: &DenseMatrix) -> (C64, Option<C64>) {
    let n = a.n;
    let lu = Lu::factor(identity_plus(a), n);
    let det = lu.det() * (-a.trace()).exp();
    if lu.singular {
        return (det, None);
    }
    let mut col = vec![C64::new(0.0, 0.0); n];
    let mut tr = C64::new(0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            col[i] = da.get(i, j);
        }
        lu.solve_in_place(&mut col);
        tr += col[j];
    }
    (det, Some(tr - da.trace()))
}

/// `Y0(lambda)` restricted to the support of `V`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BirmanSchwingerMatrix {
    pub sites: Vec<LatticeSite>,
    pub entries: DenseMatrix,
    pub lambda: C64,
    pub frobenius_norm: f64,
}

/// `|V|^{1/2}` and `V^{1/2} = |V|^{1/2} e^{i arg V}` per site.
fn half_powers(v: &Potential) -> (Vec<LatticeSite>, Vec<f64>, Vec<C64>) {
    let mut sites = Vec::new();
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (s, &val) in v.iter() {
        let root = val.norm().sqrt();
        sites.push(s.clone());
        left.push(root);
        right.push(if val.norm() == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            root * C64::from_polar(1.0, val.arg())
        });
    }
    (sites, left, right)
}

fn support_diffs(sites: &[LatticeSite]) -> Vec<LatticeSite> {
    let mut diffs: Vec<LatticeSite> = sites
        .iter()
        .flat_map(|a| sites.iter().map(move |b| a.sub(b).canonical()))
        .collect();
    diffs.sort();
    diffs.dedup();
    diffs
}

/// Evaluates `D(z)` and its relatives for one potential.
#[derive(Clone, Debug)]
pub struct DeterminantEngine {
    potential: Potential,
    kernel: Arc<GreenKernel>,
    tol: f64,
    radial_ceiling: f64,
    sites: Vec<LatticeSite>,
    left: Vec<f64>,
    right: Vec<C64>,
    diffs: Vec<LatticeSite>,
}

/// Circle samples of `D` and the Fourier moments of `log |D|`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadialTrace {
    pub r: f64,
    pub angles: Vec<f64>,
    pub samples: Vec<C64>,
    pub log_abs: Vec<f64>,
    /// `mu_n = (2/M) sum_k e^{-i n t_k} log |D(r e^{i t_k})|` for `n = 0..=n_max`.
    pub moments: Vec<C64>,
}

impl RadialTrace {
    /// `(1/2pi) int log |D(r e^{it})| dt`, equal to `mu_0 / 2`.
    pub fn mean_log_abs(&self) -> f64 {
        self.log_abs.iter().sum::<f64>() / self.log_abs.len() as f64
    }
}

pub fn circle(r: f64, m: usize) -> (Vec<f64>, Vec<C64>) {
    let angles: Vec<f64> = (0..m).map(|k| 2.0 * PI * k as f64 / m as f64).collect();
    let points = angles.iter().map(|&t| C64::from_polar(r, t)).collect();
    (angles, points)
}

impl DeterminantEngine {
    pub fn new(potential: Potential, kernel: Arc<GreenKernel>, tol: f64, radial_ceiling: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        if !(radial_ceiling > 0.0 && radial_ceiling < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "radial ceiling must lie in (0, 1), got {radial_ceiling}"
            )));
        }
        let (sites, left, right) = half_powers(&potential);
        let diffs = support_diffs(&sites);
        Ok(DeterminantEngine {
            potential,
            kernel,
            tol,
            radial_ceiling,
            sites,
            left,
            right,
            diffs,
        })
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn kernel(&self) -> &Arc<GreenKernel> {
        &self.kernel
    }

    pub fn dimension(&self) -> usize {
        self.potential.dimension()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn radial_ceiling(&self) -> f64 {
        self.radial_ceiling
    }

    /// Same potential and kernel at another quadrature tolerance.
    pub fn with_tol(&self, tol: f64) -> Result<Self> {
        DeterminantEngine::new(self.potential.clone(), self.kernel.clone(), tol, self.radial_ceiling)
    }

    fn matrices(&self, lambda: C64, tol: f64) -> Result<(DenseMatrix, DenseMatrix)> {
        let d = self.dimension();
        // the derivative rides along so that every consumer shares one cache entry
        let table = self.kernel.table(&self.diffs, lambda, d, tol, true)?;
        let n = self.sites.len();
        let mut y = DenseMatrix::zeros(n);
        let mut dy = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let e = table.get(&self.sites[i].sub(&self.sites[j])).expect("support diff tabulated");
                let w = self.left[i] * self.right[j];
                y.set(i, j, w * e.value);
                dy.set(i, j, w * e.derivative.expect("derivative requested"));
            }
        }
        Ok((y, dy))
    }

    pub fn birman_schwinger(&self, lambda: C64) -> Result<BirmanSchwingerMatrix> {
        let (entries, _) = self.matrices(lambda, self.tol)?;
        Ok(BirmanSchwingerMatrix {
            sites: self.sites.clone(),
            frobenius_norm: entries.frobenius_norm(),
            entries,
            lambda,
        })
    }

    fn check_radius(&self, z: C64) -> Result<()> {
        if z.norm() > self.radial_ceiling {
            return Err(Error::RadialCeiling {
                modulus: z.norm(),
                ceiling: self.radial_ceiling,
            });
        }
        Ok(())
    }

    /// `D(z)`, with `D(0) = 1`.
    pub fn d_of_z(&self, z: C64) -> Result<C64> {
        self.d_of_z_tol(z, self.tol)
    }

    fn d_of_z_tol(&self, z: C64, tol: f64) -> Result<C64> {
        if z == C64::new(0.0, 0.0) || self.sites.is_empty() {
            return Ok(C64::new(1.0, 0.0));
        }
        self.check_radius(z)?;
        let lambda = lambda_of_z(z, self.dimension())?;
        let (y, _) = self.matrices(lambda, tol)?;
        Ok(det2(&y))
    }

    /// `D(z)` and `D'(z) / D(z)`; the latter is `None` where `D` vanishes.
    pub fn d_and_log_derivative(&self, z: C64) -> Result<(C64, Option<C64>)> {
        if self.sites.is_empty() {
            return Ok((C64::new(1.0, 0.0), Some(C64::new(0.0, 0.0))));
        }
        if z == C64::new(0.0, 0.0) {
            return Ok((C64::new(1.0, 0.0), Some(C64::new(0.0, 0.0))));
        }
        self.check_radius(z)?;
        let d = self.dimension();
        let lambda = lambda_of_z(z, d)?;
        let (y, dy) = self.matrices(lambda, self.tol)?;
        let (det, dlog) = det2_with_log_derivative(&y, &dy);
        Ok((det, dlog.map(|g| g * dlambda_dz(z, d))))
    }

    /// `D'(z)`.
    pub fn derivative(&self, z: C64) -> Result<C64> {
        let (det, dlog) = self.d_and_log_derivative(z)?;
        match dlog {
            Some(g) => Ok(det * g),
            None => {
                // finite-difference fallback at a singular I + Y
                let h = 1e-6;
                let p = self.d_of_z(z + h)?;
                let m = self.d_of_z(z - h)?;
                Ok((p - m) / (2.0 * h))
            }
        }
    }

    /// `D` at many points; evaluations are independent.
    pub fn d_many(&self, zs: &[C64]) -> Result<Vec<C64>> {
        zs.par_iter().map(|&z| self.d_of_z(z)).collect()
    }

    /// Continuous `log D` along `path`, anchored at the principal logarithm
    /// of the first sample, which must lie within 0.5 of 1.
    pub fn log_d_path(&self, path: &[C64]) -> Result<Vec<C64>> {
        let Some(&start) = path.first() else {
            return Ok(Vec::new());
        };
        let d0 = self.d_of_z(start)?;
        if (d0 - 1.0).norm() >= 0.5 {
            return Err(Error::UnanchoredPath(d0));
        }
        self.track(path, d0.ln())
    }

    /// Continuation of `log D` from `log_start` at `path[0]`, bisecting any
    /// step whose phase increment reaches `pi/2`.
    pub fn track(&self, path: &[C64], log_start: C64) -> Result<Vec<C64>> {
        if path.is_empty() {
            return Ok(Vec::new());
        }
        let values = self.d_many(path)?;
        for (&z, &v) in path.iter().zip(&values) {
            if v.norm() < PATH_ZERO_FLOOR {
                return Err(Error::ZeroOnPath(z));
            }
        }
        let mut out = Vec::with_capacity(path.len());
        let mut current = log_start;
        out.push(current);
        for k in 1..path.len() {
            current += self.increment(path[k - 1], values[k - 1], path[k], values[k], 0)?;
            out.push(current);
        }
        Ok(out)
    }

    fn increment(&self, za: C64, da: C64, zb: C64, db: C64, depth: u32) -> Result<C64> {
        let step = (db / da).ln();
        if step.im.abs() < 0.5 * PI {
            return Ok(step);
        }
        if depth >= MAX_BISECTIONS {
            return Err(Error::ZeroOnPath(0.5 * (za + zb)));
        }
        let zm = 0.5 * (za + zb);
        let dm = self.d_of_z(zm)?;
        if dm.norm() < PATH_ZERO_FLOOR {
            return Err(Error::ZeroOnPath(zm));
        }
        Ok(self.increment(za, da, zm, dm, depth + 1)? + self.increment(zm, dm, zb, db, depth + 1)?)
    }

    /// Total change of `arg D` around the circle `|z| = r`, divided by `2 pi`.
    pub fn winding(&self, r: f64, m: usize) -> Result<f64> {
        if self.sites.is_empty() {
            return Ok(0.0);
        }
        let (_, mut pts) = circle(r, m);
        pts.push(pts[0]);
        let logs = self.track(&pts, C64::new(0.0, 0.0))?;
        Ok(logs.last().unwrap().im / (2.0 * PI))
    }

    /// `psi_n = -[z^n] log D` for `n = 1..=n_max`, from `M` samples of the
    /// continuous logarithm on `|z| = r_small`.
    pub fn taylor_psi(&self, r_small: f64, m: usize, n_max: usize) -> Result<Vec<C64>> {
        if m < 8 * n_max {
            return Err(Error::InvalidArgument(format!("need M >= 8 n_max, got M = {m}, n_max = {n_max}")));
        }
        if self.sites.is_empty() {
            return Ok(vec![C64::new(0.0, 0.0); n_max]);
        }
        // Fourier division by r^n amplifies kernel errors, so tighten here
        let fine = self.with_tol(self.tol.min(1e-13))?;
        let (angles, mut pts) = circle(r_small, m);
        pts.push(pts[0]);
        // a constant branch offset only moves the n = 0 coefficient
        let logs = fine.track(&pts, fine.d_of_z(pts[0])?.ln())?;
        let turns = (logs[m] - logs[0]).im / (2.0 * PI);
        if turns.abs() > 0.5 {
            return Err(Error::ZerosInside {
                count: turns.round().abs() as usize,
                radius: r_small,
            });
        }
        Ok((1..=n_max)
            .map(|n| {
                let c: C64 = angles
                    .iter()
                    .zip(&logs)
                    .map(|(&t, &l)| l * C64::from_polar(1.0, -(n as f64) * t))
                    .sum::<C64>()
                    / m as f64;
                -c / r_small.powi(n as i32)
            })
            .collect())
    }

    /// Samples `D` on `|z| = r` at `t_k = 2 pi k / M` and forms the moments of
    /// `log |D|`.
    pub fn radial_trace(&self, r: f64, m: usize, n_max: usize) -> Result<RadialTrace> {
        if !(r > 0.0 && r < self.radial_ceiling) {
            return Err(Error::RadialCeiling {
                modulus: r,
                ceiling: self.radial_ceiling,
            });
        }
        if m < 256 || !m.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("M must be a power of two >= 256, got {m}")));
        }
        let (angles, pts) = circle(r, m);
        let samples = self.d_many(&pts)?;
        if let Some((k, _)) = samples.iter().enumerate().find(|(_, s)| s.norm() < CIRCLE_ZERO_FLOOR) {
            return Err(Error::ZeroOnPath(pts[k]));
        }
        let log_abs: Vec<f64> = samples.iter().map(|s| s.norm().ln()).collect();
        let moments = (0..=n_max)
            .map(|n| {
                angles
                    .iter()
                    .zip(&log_abs)
                    .map(|(&t, &l)| l * C64::from_polar(1.0, -(n as f64) * t))
                    .sum::<C64>()
                    * (2.0 / m as f64)
            })
            .collect();
        Ok(RadialTrace {
            r,
            angles,
            samples,
            log_abs,
            moments,
        })
    }
}
