use std::collections::HashMap;

use lattice_trace::error::Error;
use lattice_trace::green::{registry, GreenKernel, GreenRequest, KernelSettings};
use lattice_trace::lattice::LatticeSite;
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn site(x: &[i64]) -> LatticeSite {
    LatticeSite::new(x.to_vec())
}

/// `G(n; lambda) = -sum_k W_k(n) / (2^k lambda^{k+1})` with `W_k(n)` the
/// number of nearest-neighbour walks of length `k` from the origin to `n`.
fn neumann_green(n: &[i64], lambda: Complex64, d: usize, order: usize) -> Complex64 {
    let mut walks: HashMap<Vec<i64>, f64> = HashMap::from([(vec![0; d], 1.0)]);
    let mut total = c(0.0, 0.0);
    let mut power = lambda.inv();
    for _ in 0..=order {
        total -= walks.get(n).copied().unwrap_or(0.0) * power;
        let mut next = HashMap::with_capacity(walks.len() * 2);
        for (x, w) in &walks {
            for axis in 0..d {
                for s in [-1, 1] {
                    let mut y = x.clone();
                    y[axis] += s;
                    *next.entry(y).or_insert(0.0) += 0.5 * w;
                }
            }
        }
        walks = next;
        power /= lambda;
    }
    total
}

#[test]
fn agrees_with_walk_expansion_far_from_band() {
    let kernel = GreenKernel::default();
    let diffs: [&[i64]; 5] = [&[0, 0, 0], &[1, 0, 0], &[1, 1, 0], &[2, 1, 0], &[1, 1, 1]];
    for lambda in [c(12.0, 0.0), c(0.0, 12.0), c(-13.0, 5.0)] {
        for n in diffs {
            let (g, _) = kernel
                .green_entry(&GreenRequest {
                    diff: site(n),
                    lambda,
                    d: 3,
                    tol: 1e-13,
                })
                .unwrap();
            let oracle = neumann_green(n, lambda, 3, 24);
            assert!((g - oracle).norm() < 1e-11, "{n:?} {lambda}: {g} vs {oracle}");
        }
    }
}

#[test]
fn walk_expansion_in_four_dimensions() {
    let kernel = GreenKernel::default();
    let lambda = c(16.0, 3.0);
    for n in [&[0, 0, 0, 0][..], &[1, 0, 1, 0], &[2, 0, 0, 1]] {
        let (g, _) = kernel
            .green_entry(&GreenRequest {
                diff: site(n),
                lambda,
                d: 4,
                tol: 1e-12,
            })
            .unwrap();
        assert!((g - neumann_green(n, lambda, 4, 20)).norm() < 1e-10);
    }
}

#[test]
fn derivative_matches_walk_expansion() {
    let kernel = GreenKernel::default();
    let lambda = c(10.0, 2.0);
    let h = 1e-5;
    for n in [&[0, 0, 0][..], &[1, 1, 0]] {
        let (dg, _) = kernel
            .green_derivative_entry(&GreenRequest {
                diff: site(n),
                lambda,
                d: 3,
                tol: 1e-12,
            })
            .unwrap();
        let fd = (neumann_green(n, lambda + h, 3, 30) - neumann_green(n, lambda - h, 3, 30)) / (2.0 * h);
        assert!((dg - fd).norm() < 1e-8, "{dg} vs {fd}");
    }
}

#[test]
fn conjugation_and_lattice_symmetry() {
    let kernel = GreenKernel::default();
    let lambda = c(3.4, 0.7);
    let g = |n: &[i64], l: Complex64| {
        kernel
            .green_entry(&GreenRequest {
                diff: site(n),
                lambda: l,
                d: 3,
                tol: 1e-10,
            })
            .unwrap()
            .0
    };
    for n in [&[0, 0, 0][..], &[1, 2, 0], &[2, -1, 1]] {
        assert!((g(n, lambda.conj()) - g(n, lambda).conj()).norm() < 1e-12);
    }
    let base = g(&[1, 2, 0], lambda);
    for image in [&[2, 1, 0][..], &[0, -2, 1], &[-1, 0, -2]] {
        assert!((g(image, lambda) - base).norm() < 1e-12);
    }
    // bipartite lattice: G(n; -lambda) = (-1)^{|n|+1} G(n; lambda)
    assert!((g(&[1, 0, 0], -lambda) - g(&[1, 0, 0], lambda)).norm() < 1e-10);
    assert!((g(&[1, 1, 0], -lambda) + g(&[1, 1, 0], lambda)).norm() < 1e-10);
}

#[test]
fn entries_decay_along_an_axis() {
    let kernel = GreenKernel::default();
    let lambda = c(4.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 0..6 {
        let (g, _) = kernel
            .green_entry(&GreenRequest {
                diff: site(&[k, 0, 0]),
                lambda,
                d: 3,
                tol: 1e-12,
            })
            .unwrap();
        assert!(g.re < 0.0 && g.im.abs() < 1e-14);
        assert!(g.norm() < last);
        last = g.norm();
    }
}

#[test]
fn strategies_agree() {
    let lambda = c(3.3, 0.4);
    let reference = GreenKernel::by_name("axis-reduced", KernelSettings::default()).unwrap();
    for name in registry().names() {
        let kernel = GreenKernel::by_name(name, KernelSettings::default()).unwrap();
        assert_eq!(kernel.strategy_name(), name);
        for n in [&[0, 0, 0][..], &[1, 1, 0]] {
            let req = GreenRequest {
                diff: site(n),
                lambda,
                d: 3,
                tol: 1e-9,
            };
            let (a, _) = kernel.green_entry(&req).unwrap();
            let (b, _) = reference.green_entry(&req).unwrap();
            assert!((a - b).norm() < 1e-8, "{name}: {a} vs {b}");
        }
    }
}

/// Level-to-level discrepancy at exactly `points` per dimension.
fn discrepancy(lambda: Complex64, points: usize) -> f64 {
    let kernel = GreenKernel::by_name(
        "axis-reduced",
        KernelSettings {
            min_points: points / 2,
            max_points: Some(points),
            ..KernelSettings::default()
        },
    )
    .unwrap();
    let req = GreenRequest {
        diff: site(&[0, 0, 0]),
        lambda,
        d: 3,
        tol: 1e-300,
    };
    match kernel.green_entry(&req) {
        Err(Error::QuadratureNotConverged { discrepancy, .. }) => discrepancy,
        other => panic!("expected a capped rule, got {other:?}"),
    }
}

#[test]
fn discrepancy_decays_geometrically() {
    for lambda in [c(4.5, 0.0), c(3.2, 0.5)] {
        let mut last = f64::INFINITY;
        for points in [16, 32, 64, 128] {
            let e = discrepancy(lambda, points);
            if last > 1e-13 {
                assert!(e <= 0.5 * last, "{lambda}: {points} points, {e} after {last}");
            }
            last = e;
        }
        assert!(last < 1e-8, "{lambda}: {last}");
    }
}

#[test]
fn band_and_floor_are_enforced() {
    let kernel = GreenKernel::default();
    let req = |lambda| GreenRequest {
        diff: site(&[0, 0, 0]),
        lambda,
        d: 3,
        tol: 1e-8,
    };
    assert!(matches!(kernel.green_entry(&req(c(1.0, 0.0))), Err(Error::OnBand(_))));
    assert!(matches!(
        kernel.green_entry(&req(c(3.0001, 0.0))),
        Err(Error::TooCloseToBand { .. })
    ));
}
