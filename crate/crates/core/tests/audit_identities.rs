use std::sync::Arc;

use lattice_trace::audit::Auditor;
use lattice_trace::determinant::DeterminantEngine;
use lattice_trace::green::{GreenKernel, KernelSettings};
use lattice_trace::lattice::{LatticeSite, Potential};
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn engine_with_floor(v: Potential, band_floor: f64) -> DeterminantEngine {
    let kernel = GreenKernel::by_name(
        "axis-reduced",
        KernelSettings {
            band_floor,
            ..KernelSettings::default()
        },
    )
    .unwrap();
    DeterminantEngine::new(v, Arc::new(kernel), 1e-10, 0.995).unwrap()
}

fn rank_one(v: Complex64) -> DeterminantEngine {
    engine_with_floor(Potential::rank_one(3, v).unwrap(), 1e-3)
}

fn three_site() -> Potential {
    Potential::new(
        3,
        [
            (LatticeSite::new(vec![0, 0, 0]), c(3.0, 0.0)),
            (LatticeSite::new(vec![1, 0, 0]), c(0.5, 0.0)),
            (LatticeSite::new(vec![-1, 1, 0]), c(-1.0, 0.0)),
        ],
    )
    .unwrap()
}

#[test]
fn sigma_budget_vanishes_and_limit_form_grows() {
    let e = engine_with_floor(Potential::rank_one(3, c(4.0, 0.0)).unwrap(), 5e-4);
    let auditor = Auditor::default();
    let mut last = f64::NEG_INFINITY;
    for r in [0.9, 0.95, 0.975] {
        let report = auditor.verify_identities(&e, r).unwrap();
        assert_eq!(report.zero_count, 1);
        assert!(report.sigma_budget.abs() < 1e-6, "r = {r}: {}", report.sigma_budget);
        // Jensen leaves N log r once the zeros are factored out
        assert!((report.sigma_budget_limit_form - r.ln()).abs() < 1e-6);
        assert!(report.sigma_budget_limit_form >= last - 1e-8);
        last = report.sigma_budget_limit_form;
    }
}

#[test]
fn first_moment_gap_is_the_finite_radius_correction() {
    let e = rank_one(c(4.0, 0.0));
    let report = Auditor::default().verify_identities(&e, 0.9).unwrap();
    assert!(report.zxj_regularized_residual < 1e-5);
    assert!(report.zxj_algebra_residual < 1e-12);
    // (d/2) sum conj(z) (1/r^2 - 1) separates the unregularized form
    let z = report.zeros[0].z;
    let r = report.r;
    let gap = 1.5 * z.norm() * (1.0 / (r * r) - 1.0);
    assert!((report.zxj_residual - gap).abs() < 1e-5, "{} vs {gap}", report.zxj_residual);
}

#[test]
fn second_moment_identity_picks_the_consistent_constant() {
    let e = rank_one(c(4.0, 0.0));
    let report = Auditor::default().verify_identities(&e, 0.9).unwrap();
    assert!(report.t4_consistent_residual < 1e-5);
    assert!(report.t4_printed_residual > 1e-3);
    assert_eq!(report.t4_satisfied_by, "consistent");
    assert!(report.moment_residuals.iter().all(|&m| m < 1e-5));
}

#[test]
fn complex_coupling_moments() {
    let e = rank_one(c(0.0, 4.0));
    let report = Auditor::default().verify_identities(&e, 0.9).unwrap();
    assert_eq!(report.zero_count, 1);
    assert!(report.jensen_residual < 1e-6);
    assert!(report.moment_residuals.iter().all(|&m| m < 1e-5), "{:?}", report.moment_residuals);
}

#[test]
fn bounds_hold_with_zeros_present() {
    let auditor = Auditor::default();
    for e in [rank_one(c(4.0, 0.0)), rank_one(c(-2.0, 3.0))] {
        let report = auditor.verify_bounds(&e, 1.0, 0.9).unwrap();
        assert!(report.all_ok, "{report:?}");
        assert!(report.eiv_lower.attained <= report.eiv.attained + 1e-10);
    }
}

#[test]
fn real_audit_on_bound_states() {
    let auditor = Auditor::default();
    for v in [Potential::rank_one(3, c(4.0, 0.0)).unwrap(), three_site()] {
        let e = engine_with_floor(v, 1e-3);
        let report = auditor.real_potential_audit(&e, 1.0, 0.9).unwrap();
        assert!(report.zeros_real);
        assert!(report.all_ok, "{report:?}");
        assert!(report.kappa_sign_form_residual < 1e-9);
        assert!(report.sign_structure.iter().all(|&s| s < 1e-9));
        assert!(report.zxjr_regularized_residual < 1e-5);
    }
}

#[test]
fn real_audit_rejects_complex_potentials() {
    let e = rank_one(c(1.0, 1.0));
    assert!(Auditor::default().real_potential_audit(&e, 1.0, 0.9).is_err());
}
