use std::f64::consts::PI;
use std::sync::Arc;

use lattice_trace::determinant::{det2, DenseMatrix, DeterminantEngine};
use lattice_trace::error::Error;
use lattice_trace::green::GreenKernel;
use lattice_trace::lattice::{psi_coefficients, LatticeSite, Potential};
use lattice_trace::spectral::{lambda_of_z, z_of_lambda};
use lattice_trace::zeros::ZeroLocator;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn engine(v: Potential) -> DeterminantEngine {
    DeterminantEngine::new(v, Arc::new(GreenKernel::default()), 1e-10, 0.995).unwrap()
}

fn rank_one(v: Complex64) -> DeterminantEngine {
    engine(Potential::rank_one(3, v).unwrap())
}

/// `e^{-t} I_0(t)` by the trapezoid rule on `[0, pi]`.
fn scaled_i0(t: f64) -> f64 {
    let n = 400;
    let h = PI / n as f64;
    let inner: f64 = (1..n).map(|k| (t * ((k as f64 * h).cos() - 1.0)).exp()).sum();
    (inner + 0.5 * (1.0 + (-2.0 * t).exp())) * h / PI
}

/// `G(0; lambda) = -int_0^inf e^{-lambda t} I_0(t)^3 dt` for real `lambda > 3`,
/// with the substitution `t = exp(u - exp(-u))`.
fn laplace_green(lambda: f64) -> f64 {
    let h = 1.0 / 64.0;
    let mut total = 0.0;
    for k in -448..=448 {
        let u = k as f64 * h;
        let t = (u - (-u).exp()).exp();
        let dt = t * (1.0 + (-u).exp());
        if t == 0.0 || !dt.is_finite() {
            continue;
        }
        total += (-(lambda - 3.0) * t).exp() * scaled_i0(t).powi(3) * dt;
    }
    -total * h
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) < 0.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) * flo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn laplace_oracle_matches_return_moments() {
    // <(cos t1 + cos t2 + cos t3)^k> = 1, 3/2, 45/8 for k = 0, 2, 4
    let l = 30.0f64;
    let series = -(1.0 / l + 1.5 / l.powi(3) + 5.625 / l.powi(5));
    assert!((laplace_green(l) - series).abs() < 1e-8);
}

#[test]
fn strong_real_coupling_zero_matches_scalar_oracle() {
    let lambda = bisect(|l| 1.0 + 4.0 * laplace_green(l), 3.5, 6.0);
    let e = rank_one(c(4.0, 0.0));
    let zs = ZeroLocator::default().locate_zeros(&e, 0.9).unwrap();
    assert_eq!(zs.count(), 1);
    let zero = &zs.zeros[0];
    assert_eq!(zero.multiplicity, 1);
    assert!((zero.lambda.re - lambda).abs() < 1e-8, "{} vs {lambda}", zero.lambda);
    assert!(zero.lambda.im.abs() < 1e-10);
    let z = z_of_lambda(c(lambda, 0.0), 3).unwrap();
    assert!((zero.z - z).norm() < 1e-8);
}

#[test]
fn attractive_coupling_mirrors_the_zero() {
    let loc = ZeroLocator::default();
    let plus = loc.locate_zeros(&rank_one(c(4.0, 0.0)), 0.9).unwrap();
    let minus = loc.locate_zeros(&rank_one(c(-4.0, 0.0)), 0.9).unwrap();
    assert_eq!(minus.count(), 1);
    assert!((minus.zeros[0].z + plus.zeros[0].z).norm() < 1e-9);
    assert!((minus.zeros[0].lambda + plus.zeros[0].lambda).norm() < 1e-8);
}

#[test]
fn imaginary_coupling_gives_upper_half_plane_eigenvalue() {
    let e = rank_one(c(0.0, 4.0));
    let zs = ZeroLocator::default().locate_zeros(&e, 0.9).unwrap();
    assert_eq!(zs.count(), 1);
    let zero = &zs.zeros[0];
    assert!(zero.lambda.im > 0.0);
    assert!(e.d_of_z(zero.z).unwrap().norm() < 1e-9);
    // 1 + v G(0; lambda) vanishes at the zero
    let y = e.birman_schwinger(zero.lambda).unwrap().entries.get(0, 0);
    assert!((1.0 + y).norm() < 1e-9);
}

#[test]
fn zeros_are_stable_under_radius_changes() {
    let v = Potential::new(
        3,
        [
            (LatticeSite::new(vec![0, 0, 0]), c(3.0, 0.0)),
            (LatticeSite::new(vec![1, 0, 0]), c(0.5, 0.0)),
            (LatticeSite::new(vec![-1, 1, 0]), c(-1.0, 0.0)),
        ],
    )
    .unwrap();
    let e = engine(v);
    let loc = ZeroLocator::default();
    let sets: Vec<_> = [0.88, 0.9, 0.92].iter().map(|&r| loc.locate_zeros(&e, r).unwrap()).collect();
    for s in &sets {
        assert_eq!(s.count(), sets[1].count());
        for (a, b) in s.zeros.iter().zip(&sets[1].zeros) {
            assert!((a.z - b.z).norm() < 1e-9);
        }
    }
    assert!(sets[1].count() >= 1);
}

#[test]
fn weak_potentials_have_no_zeros() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let loc = ZeroLocator::new(256);
    for _ in 0..4 {
        let v = random_potential(&mut rng, 3, 0.3);
        assert_eq!(loc.count_zeros(&engine(v), 0.9).unwrap(), 0);
    }
}

fn random_potential(rng: &mut ChaCha8Rng, sites: usize, scale: f64) -> Potential {
    let mut entries: Vec<(LatticeSite, Complex64)> = Vec::new();
    while entries.len() < sites {
        let s = LatticeSite::new((0..3).map(|_| rng.gen_range(-2..=2)).collect());
        if entries.iter().any(|(t, _)| *t == s) {
            continue;
        }
        entries.push((s, c(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))));
    }
    Potential::new(3, entries).unwrap()
}

/// `det_2(I + G V)` with `(G V)_{xy} = G(x - y) V_y`, no square roots.
fn cyclic_form(e: &DeterminantEngine, z: Complex64) -> Complex64 {
    let v = e.potential();
    let lambda = lambda_of_z(z, 3).unwrap();
    let sites: Vec<_> = v.sites().cloned().collect();
    let diffs: Vec<_> = sites.iter().flat_map(|a| sites.iter().map(move |b| a.sub(b))).collect();
    let table = e.kernel().green_table(&diffs, lambda, 3, e.tol()).unwrap();
    let rows: Vec<Vec<Complex64>> = sites
        .iter()
        .map(|x| sites.iter().map(|y| table.value(&x.sub(y)) * v.get(y)).collect())
        .collect();
    det2(&DenseMatrix::from_rows(&rows))
}

#[test]
fn symmetrised_and_cyclic_forms_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..10 {
        let v = random_potential(&mut rng, 1 + k % 5, 2.0);
        let e = engine(v);
        for _ in 0..3 {
            let z = Complex64::from_polar(rng.gen_range(0.1..0.9), rng.gen_range(0.0..2.0 * PI));
            let a = e.d_of_z(z).unwrap();
            let b = cyclic_form(&e, z);
            assert!((a - b).norm() <= 1e-9 * (1.0 + a.norm()), "{a} vs {b}");
        }
    }
}

#[test]
fn unit_site_taylor_coefficients() {
    let v = Potential::rank_one(3, c(1.0, 0.0)).unwrap();
    let psi = engine(v.clone()).taylor_psi(0.1, 256, 4).unwrap();
    assert!(psi[0].norm() < 1e-10);
    assert!((psi[1] - 2.0 / 9.0).norm() < 1e-8);
    assert!((psi[2] - 8.0 / 81.0).norm() < 1e-8);
    assert!((psi[3] + 8.0 / 81.0).norm() < 1e-7, "{}", psi[3]);
    let closed = psi_coefficients(&v, 3);
    assert!((closed.psi4 + 8.0 / 81.0).norm() < 1e-15);
}

#[test]
fn taylor_probe_refuses_circles_with_zeros() {
    let e = rank_one(c(4.0, 0.0));
    assert!(matches!(e.taylor_psi(0.5, 256, 4), Err(Error::ZerosInside { count: 1, .. })));
}
