//! Monte-Carlo exit frequencies against the analytic exit upper bound.
//!
//! The needle starts at rest in (−1,0,0) with no field. The bound uses
//! ξ = 0, i.e. no slack at all, which is the strictest choice.

use llg1d::det::stability_radius;
use llg1d::grid::{Grid1D, MagnetizationField};
use llg1d::ldp::{self, Event};
use llg1d::model::{NoiseModel, PhysicalParams};
use llg1d::sde::{SdeRunConfig, SdeScheme};

fn exit_estimate(eps: f64, rho: f64, n_paths: usize) -> (ldp::EventEstimate, f64) {
    let g = Grid1D::new(1.0, 17).unwrap();
    let p = PhysicalParams::new(1.0, 1.0, eps, 1.0).unwrap();
    let noise = NoiseModel::standard_basis();
    assert!(rho <= stability_radius(&p, &g));
    let r = rho - 0.001;
    let bound = ldp::upper_bound_probability(r, rho, 0.0, eps, &p, &noise, &g).unwrap();
    // α = β = l = |a|² = 1: exponent −r²/(16 ε).
    assert!((bound - (-r * r / (16.0 * eps)).exp()).abs() <= 1e-15);
    let cfg = SdeRunConfig::new(SdeScheme::HeunStratonovich, g, p, noise, 2e-3, 0);
    let m0 = MagnetizationField::uniform(17, [-1.0, 0.0, 0.0]);
    let est = ldp::estimate_event_probability(&cfg, &m0, Event::Exit { rho }, n_paths, 31).unwrap();
    assert_eq!(est.n_failures, 0);
    (est, bound)
}

#[test]
fn small_noise_exit_stays_below_the_bound() {
    let (est, bound) = exit_estimate(1e-5, 0.04, 400);
    assert!((bound - 7.4e-5).abs() < 1e-6, "bound {bound}");
    assert_eq!(est.n_success, 0);
    assert!(est.p_hat <= bound);
}

#[test]
fn moderate_noise_exit_is_consistent_with_the_bound() {
    let (est, bound) = exit_estimate(2e-4, 0.04, 400);
    eprintln!("eps 2e-4: {}/{} exits, bound {bound:.3}", est.n_success, est.n_paths);
    // The bound is nontrivial here, and the data must not contradict it.
    assert!(bound < 0.7, "bound {bound}");
    assert!(est.wilson_95.0 <= bound, "{est:?} vs bound {bound}");
    assert!(est.p_hat <= bound, "{est:?} vs bound {bound}");
}
