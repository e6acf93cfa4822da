//! Trapezoid-rule integrands for the free lattice resolvent.
//!
//! All strategies fold the torus onto `[0, pi]^m` using the evenness of
//! `sum_j cos k_j` in each coordinate: `e^{i<n,k>}` is replaced by
//! `prod_j cos(n_j k_j)` and the uniform `N`-point rule gets weight 1 at
//! `k = 0, pi` and 2 elsewhere.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::lattice::LatticeSite;
use crate::registry::Registry;

/// Accumulated weighted sums for one requested diff.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sums {
    pub value: Complex64,
    pub derivative: Complex64,
}

/// One batch of canonical diffs at a fixed spectral parameter.
pub struct GridJob<'a> {
    pub d: usize,
    pub lambda: Complex64,
    pub diffs: &'a [LatticeSite],
    pub with_derivative: bool,
}

pub trait GreenStrategy: Send + Sync + Debug {
    fn name(&self) -> &'static str;

    /// Number of torus coordinates sampled by the trapezoid rule.
    fn grid_dims(&self, d: usize) -> usize;

    /// Largest frequency that the sampled coordinates must resolve.
    fn max_sampled_frequency(&self, diffs: &[LatticeSite]) -> i64;

    /// Adds the weighted integrand over the folded `points`-grid into `out`
    /// (one slot per diff). With `fresh_only`, points that also belong to the
    /// `points / 2` grid are skipped, so successive calls nest.
    fn accumulate(&self, job: &GridJob<'_>, points: usize, fresh_only: bool, out: &mut [Sums]);
}

pub fn registry() -> &'static Registry<dyn GreenStrategy> {
    static REG: OnceLock<Registry<dyn GreenStrategy>> = OnceLock::new();
    REG.get_or_init(|| {
        Registry::<dyn GreenStrategy>::new("green")
            .register("axis-reduced", || Arc::new(AxisReduced))
            .register("torus-trapezoid", || Arc::new(TorusTrapezoid))
    })
}

/// Per-level table of `cos(n * 2 pi j / N)` for `0 <= j <= N/2`.
struct CosTable {
    rows: Vec<Vec<f64>>,
}

impl CosTable {
    fn new(max_n: i64, points: usize) -> Self {
        let half = points / 2;
        let rows = (0..=max_n)
            .map(|n| {
                (0..=half)
                    .map(|j| (n as f64 * 2.0 * PI * j as f64 / points as f64).cos())
                    .collect()
            })
            .collect();
        CosTable { rows }
    }

    #[inline]
    fn get(&self, n: i64, j: usize) -> f64 {
        self.rows[n as usize][j]
    }
}

/// Calls `f(indices, weight)` for each folded grid point of an `m`-dimensional
/// `points`-grid.
fn for_each_point(m: usize, points: usize, fresh_only: bool, mut f: impl FnMut(&[usize], f64)) {
    let half = points / 2;
    let mut idx = vec![0usize; m];
    loop {
        let coarse = fresh_only && idx.iter().all(|j| j % 2 == 0);
        if !coarse {
            let weight: f64 = idx
                .iter()
                .map(|&j| if j == 0 || j == half { 1.0 } else { 2.0 })
                .product();
            f(&idx, weight);
        }
        let mut axis = 0;
        loop {
            if axis == m {
                return;
            }
            idx[axis] += 1;
            if idx[axis] <= half {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

#[inline]
pub(crate) fn csqrt(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let t = (0.5 * (r + z.re.abs())).sqrt();
    if z.re >= 0.0 {
        Complex64::new(t, z.im / (2.0 * t))
    } else {
        Complex64::new(z.im.abs() / (2.0 * t), t.copysign(z.im))
    }
}

/// Samples `d - 1` coordinates and integrates the remaining one in closed
/// form: for `c` off `[-1, 1]` and `w` the root of `w + 1/w = 2c` inside the
/// unit disk,
/// `(1/2pi) int e^{ink} / (cos k - c) dk = 2 w^{|n|+1} / (w^2 - 1)`.
#[derive(Debug)]
pub struct AxisReduced;

impl GreenStrategy for AxisReduced {
    fn name(&self) -> &'static str {
        "axis-reduced"
    }

    fn grid_dims(&self, d: usize) -> usize {
        d - 1
    }

    fn max_sampled_frequency(&self, diffs: &[LatticeSite]) -> i64 {
        diffs
            .iter()
            .flat_map(|s| {
                let c = s.coords();
                c[..c.len() - 1].iter().copied()
            })
            .max()
            .unwrap_or(0)
    }

    fn accumulate(&self, job: &GridJob<'_>, points: usize, fresh_only: bool, out: &mut [Sums]) {
        let m = job.d - 1;
        let max_sampled = self.max_sampled_frequency(job.diffs);
        let max_axis = job
            .diffs
            .iter()
            .map(|s| s.coords()[m])
            .max()
            .unwrap_or(0) as usize;
        let table = CosTable::new(max_sampled.max(1), points);
        let mut pow = vec![Complex64::new(0.0, 0.0); max_axis + 2];

        for_each_point(m, points, fresh_only, |idx, weight| {
            let s: f64 = idx.iter().map(|&j| table.get(1, j)).sum();
            let c = job.lambda - s;
            let root = csqrt(c * c - 1.0);
            // the outer root avoids cancellation; its inverse is the inner one
            let (w1, w2) = (c - root, c + root);
            let w = if w1.norm_sqr() >= w2.norm_sqr() { w1.inv() } else { w2.inv() };
            pow[0] = w;
            for k in 1..pow.len() {
                pow[k] = pow[k - 1] * w;
            }
            let w2 = w * w;
            let inv_q = (w2 - 1.0).inv();
            let scale = 2.0 * weight * inv_q;
            let dscale = 4.0 * weight * inv_q * inv_q * inv_q;

            for (diff, acc) in job.diffs.iter().zip(out.iter_mut()) {
                let n = diff.coords();
                let mut trig = 1.0;
                for (axis, &j) in idx.iter().enumerate() {
                    trig *= table.get(n[axis], j);
                }
                let na = n[m] as usize;
                acc.value += trig * scale * pow[na];
                if job.with_derivative {
                    let nf = na as f64;
                    acc.derivative += trig * dscale * pow[na + 1] * ((nf - 1.0) * w2 - (nf + 1.0));
                }
            }
        });
    }
}

/// Plain product trapezoid over all `d` torus coordinates.
#[derive(Debug)]
pub struct TorusTrapezoid;

impl GreenStrategy for TorusTrapezoid {
    fn name(&self) -> &'static str {
        "torus-trapezoid"
    }

    fn grid_dims(&self, d: usize) -> usize {
        d
    }

    fn max_sampled_frequency(&self, diffs: &[LatticeSite]) -> i64 {
        diffs.iter().map(|s| s.max_abs()).max().unwrap_or(0)
    }

    fn accumulate(&self, job: &GridJob<'_>, points: usize, fresh_only: bool, out: &mut [Sums]) {
        let m = job.d;
        let table = CosTable::new(self.max_sampled_frequency(job.diffs).max(1), points);
        for_each_point(m, points, fresh_only, |idx, weight| {
            let s: f64 = idx.iter().map(|&j| table.get(1, j)).sum();
            let r = (s - job.lambda).inv();
            let wr = weight * r;
            for (diff, acc) in job.diffs.iter().zip(out.iter_mut()) {
                let n = diff.coords();
                let mut trig = 1.0;
                for (axis, &j) in idx.iter().enumerate() {
                    trig *= table.get(n[axis], j);
                }
                acc.value += trig * wr;
                if job.with_derivative {
                    acc.derivative += trig * wr * r;
                }
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csqrt_matches_principal_branch() {
        for &(re, im) in &[(4.0, 0.0), (-4.0, 0.0), (-4.0, -0.0), (1.0, 2.0), (-3.0, -0.5), (0.0, 1.0)] {
            let z = Complex64::new(re, im);
            let ours = csqrt(z);
            let lib = z.sqrt();
            assert!((ours - lib).norm() < 1e-15, "{z}: {ours} vs {lib}");
        }
    }

    #[test]
    fn folded_grid_weights_sum_to_full_grid() {
        for m in 1..4 {
            let mut total = 0.0;
            for_each_point(m, 8, false, |_, w| total += w);
            assert_eq!(total, 8f64.powi(m as i32));
            let mut fresh = 0.0;
            for_each_point(m, 8, true, |_, w| fresh += w);
            assert_eq!(fresh, 8f64.powi(m as i32) - 4f64.powi(m as i32));
        }
    }

    #[test]
    fn one_dimensional_closed_form() {
        // (1/2pi) int dk / (cos k - c) = -1 / sqrt(c^2 - 1) for real c > 1
        let c = 1.7f64;
        let lambda = Complex64::new(c, 0.0);
        let root = (lambda * lambda - 1.0).sqrt();
        let w = lambda - root;
        let g = 2.0 * w / (w * w - 1.0);
        assert!((g.re + 1.0 / (c * c - 1.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn registry_lists_both_strategies() {
        let names = registry().names();
        assert_eq!(names, vec!["axis-reduced", "torus-trapezoid"]);
        assert_eq!(registry().default_name(), "axis-reduced");
    }
}
