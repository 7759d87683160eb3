//! Closed-form stability quantities of the axial states and decay measurement.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{self, Grid1D, MagnetizationField};
use crate::model::PhysicalParams;
use crate::vec3::{self, Vec3};

use super::TrajectoryRecord;

/// Tolerance used when comparing the pointwise inequalities.
const CLAIM_TOL: f64 = 1e-12;
/// Nodes with `|m₁|` below this fail the first claim outright.
const M1_GUARD: f64 = 1e-9;

/// H¹ radius around `(±1, 0, 0)` inside which the unforced flow returns to
/// the axial state: `α / ((1 + 2α) · 2k²√l)`.
pub fn stability_radius(p: &PhysicalParams, g: &Grid1D) -> f64 {
    let l = g.length();
    let k = grid::embedding_constant_k(l).expect("grid length is positive");
    p.alpha / (1.0 + 2.0 * p.alpha) / (2.0 * k * k * l.sqrt())
}

/// Smallest field magnitude for which the field-aligned state is
/// exponentially attracting.
pub fn field_threshold(p: &PhysicalParams) -> f64 {
    let (a, b) = (p.alpha, p.beta);
    let first = (4.0 * b + 4.0 * a * b) / (3.0 * a);
    let second = (2.0 * b + 4.0 * a * b - a) / a;
    first.max(second)
}

/// Decay rate `γ` of the H¹ distance to the field-aligned state; the
/// distance is bounded by `d(0) e^{−γt/2}`.
pub fn decay_rate_gamma(p: &PhysicalParams, h_mag: f64) -> f64 {
    let (a, b) = (p.alpha, p.beta);
    let first = a * h_mag + a - 2.0 * b - 4.0 * a * b;
    let second = 1.5 * a * h_mag - 2.0 * b - 2.0 * a * b;
    first.min(second)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UandzReport {
    /// H¹ distance from `m` to the axial state.
    pub distance: f64,
    pub within_radius: bool,
    /// `(1−m₁²)/m₁² + α(1−m₁²)²/m₁² − αm₁² ≤ 0` at every node.
    pub claim1: bool,
    /// `⟨m(x), ζ⟩ ≥ 3/4` at every node.
    pub claim2: bool,
    /// `(7/8)|m(x) − ζ|² ≤ |m(x) × ζ|²` at every node.
    pub claim3: bool,
    /// Largest value of the claim-1 expression over nodes with `|m₁|` above the guard.
    pub claim1_max: f64,
}

/// Evaluates the pointwise consequences of H¹-closeness to `zeta = (±1, 0, 0)`.
pub fn check_uandz(
    m: &MagnetizationField,
    zeta: Vec3,
    p: &PhysicalParams,
    g: &Grid1D,
) -> Result<UandzReport> {
    if !(zeta[1] == 0.0 && zeta[2] == 0.0 && zeta[0].abs() == 1.0) {
        return Err(invalid(format!("zeta must be (±1, 0, 0), got {zeta:?}")));
    }
    if m.len() != g.n_points() {
        return Err(invalid("field does not conform to grid"));
    }
    if !m.is_saturated(grid::SATURATION_TOL) {
        return Err(Error::PreconditionViolation("field is not saturated".into()));
    }
    let distance = grid::h1_distance_to_uniform(m, zeta, g);
    let alpha = p.alpha;
    let mut report = UandzReport {
        distance,
        within_radius: distance <= stability_radius(p, g),
        claim1: true,
        claim2: true,
        claim3: true,
        claim1_max: f64::NEG_INFINITY,
    };
    for v in &m.values {
        let m1 = v[0];
        if m1.abs() < M1_GUARD {
            report.claim1 = false;
        } else {
            let s = m1 * m1;
            let q = 1.0 - s;
            let e = q / s + alpha * q * q / s - alpha * s;
            report.claim1_max = report.claim1_max.max(e);
            if e > CLAIM_TOL {
                report.claim1 = false;
            }
        }
        if vec3::dot(*v, zeta) < 0.75 {
            report.claim2 = false;
        }
        let lhs = 0.875 * vec3::norm_sq(vec3::sub(*v, zeta));
        let rhs = vec3::norm_sq(vec3::cross(*v, zeta));
        if lhs > rhs + CLAIM_TOL {
            report.claim3 = false;
        }
    }
    Ok(report)
}

/// Least-squares rate `r` in `d ≈ C e^{−rt}`.
///
/// The window ends before the first nonpositive distance.
pub fn fit_exponential_rate(times: &[f64], distances: &[f64]) -> Result<f64> {
    if times.len() != distances.len() {
        return Err(invalid("times and distances differ in length"));
    }
    let n = distances
        .iter()
        .position(|d| !(*d > 0.0 && d.is_finite()))
        .unwrap_or(distances.len());
    if n < 2 {
        return Err(Error::MeasurementFailure(format!(
            "only {n} positive distances in the fit window"
        )));
    }
    let ts = &times[..n];
    let ys: Vec<f64> = distances[..n].iter().map(|d| d.ln()).collect();
    let tm = ts.iter().sum::<f64>() / n as f64;
    let ym = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = ts.iter().map(|t| (t - tm) * (t - tm)).sum();
    if sxx <= 0.0 {
        return Err(Error::MeasurementFailure("fit window has no time extent".into()));
    }
    let sxy: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    Ok(-sxy / sxx)
}

/// Fitted exponential decay rate of the H¹ distance from the recorded
/// states to `reference`.
pub fn measure_decay(traj: &TrajectoryRecord, reference: &MagnetizationField) -> Result<f64> {
    if traj.states.len() < 10 {
        return Err(Error::MeasurementFailure(format!(
            "need at least 10 samples, got {}",
            traj.states.len()
        )));
    }
    let g = traj
        .grid
        .ok_or_else(|| invalid("trajectory does not carry its grid"))?;
    let d = traj.distances_to(reference, &g)?;
    fit_exponential_rate(&traj.times, &d)
}
