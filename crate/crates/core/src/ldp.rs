//! Large-deviation tools: reversal-field construction, control costs,
//! exponential probability bounds and Monte-Carlo event estimation.

use serde::{Deserialize, Serialize};

use crate::det::{self, ControlPath, SkeletonSystem, TrajectoryRecord};
use crate::error::{invalid, Error, Result};
use crate::grid::{self, Grid1D, MagnetizationField};
use crate::model::{AppliedFieldSchedule, NoiseModel, PhysicalParams};
use crate::sde::{self, SdeRunConfig};
use crate::vec3::{self, Vec3};

/// Standard normal quantile at 0.975.
pub const Z_95: f64 = 1.959_963_984_540_054;
/// Waypoint gaps must stay below this fraction of `1/k`.
const GAP_SLACK: f64 = 0.9;
/// Geometric step of the field-magnitude search.
const R_GRID_FACTOR: f64 = 1.05;
/// Applied to the smallest admissible field magnitude on the search grid.
const R_SAFETY: f64 = 1.1;
/// Ensemble failure fraction above which an estimate is flagged as degraded.
const DEGRADED_FRACTION: f64 = 0.01;

pub const MINUS_X: Vec3 = [-1.0, 0.0, 0.0];

/// Points on the unit sphere from `(−1,0,0)` to `(1,0,0)` whose consecutive
/// uniform states are H¹-closer than `1/k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoints {
    pub points: Vec<Vec3>,
    pub eta: f64,
    pub delta: f64,
    pub length: f64,
}

impl Waypoints {
    pub fn n_segments(&self) -> usize {
        self.points.len() - 1
    }

    pub fn k(&self) -> f64 {
        grid::embedding_constant_k(self.length).expect("length is positive")
    }

    /// H¹ distances between consecutive uniform states.
    pub fn gaps(&self) -> Vec<f64> {
        let s = self.length.sqrt();
        self.points
            .windows(2)
            .map(|w| vec3::norm(vec3::sub(w[0], w[1])) * s)
            .collect()
    }
}

/// Great-circle waypoints in the `(e₁, e₂)` plane with the fewest segments
/// whose H¹ gap is at most 90% of `1/k`.
pub fn build_waypoints(delta: f64, g: &Grid1D) -> Result<Waypoints> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    let l = g.length();
    let k = grid::embedding_constant_k(l)?;
    let limit = GAP_SLACK / k;
    let chord = |n: usize| 2.0 * (std::f64::consts::PI / (2.0 * n as f64)).sin();
    let mut n = 1usize;
    while chord(n) * l.sqrt() > limit {
        n += 1;
    }
    let points: Vec<Vec3> = (0..=n)
        .map(|i| {
            let a = i as f64 * std::f64::consts::PI / n as f64;
            [-a.cos(), a.sin(), 0.0]
        })
        .collect();
    let mut w = Waypoints {
        points,
        eta: 0.0,
        delta,
        length: l,
    };
    // End points exactly on the axis.
    w.points[0] = MINUS_X;
    w.points[n] = vec3::E1;
    let max_gap = w.gaps().into_iter().fold(0.0, f64::max);
    w.eta = (1.0 / k - max_gap).min(0.5 * delta);
    Ok(w)
}

/// Whether field magnitude `r` meets the per-segment decay requirement.
fn r_admissible(r: f64, w: &Waypoints, horizon: f64, p: &PhysicalParams) -> bool {
    let gamma = det::decay_rate_gamma(p, r);
    let tn = horizon / w.n_segments() as f64;
    r > det::field_threshold(p) && (1.0 / w.k()) * (-0.5 * gamma * tn).exp() < w.eta
}

/// Field magnitude for the reversal schedule: the smallest admissible value
/// on a 1.05-geometric grid, times 1.1.
pub fn choose_r(w: &Waypoints, horizon: f64, p: &PhysicalParams) -> Result<f64> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid(format!("horizon must be positive, got {horizon}")));
    }
    if w.eta.is_nan() || w.eta <= 0.0 {
        return Err(invalid("waypoint margin eta must be positive"));
    }
    p.validate()?;
    let threshold = det::field_threshold(p);
    let mut r = if threshold > 0.0 { threshold * R_GRID_FACTOR } else { 1e-3 };
    // γ grows linearly in R with slope ≥ α, so this terminates.
    while !r_admissible(r, w, horizon, p) {
        r *= R_GRID_FACTOR;
        if !r.is_finite() {
            return Err(invalid("no admissible field magnitude"));
        }
    }
    Ok(r * R_SAFETY)
}

/// Applied field and equivalent control that carry the magnetization from
/// `(−1,0,0)` to `(1,0,0)` along the waypoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReversalPlan {
    pub waypoints: Waypoints,
    pub field_magnitude: f64,
    pub horizon: f64,
    pub schedule: AppliedFieldSchedule,
    pub control: ControlPath,
    pub cost: f64,
}

impl ReversalPlan {
    /// Max deviation of `Σ_j a^j φ_j` from the schedule over segments.
    pub fn reconstruction_error(&self, noise: &NoiseModel) -> Result<f64> {
        let dirs = three_directions(noise)?;
        Ok(self
            .control
            .segment_values
            .iter()
            .zip(&self.schedule.segment_values)
            .map(|(phi, k)| {
                let v = (0..3).fold(vec3::ZERO, |acc, j| vec3::axpy(acc, phi[j], dirs[j]));
                vec3::norm(vec3::sub(v, *k))
            })
            .fold(0.0, f64::max))
    }
}

fn three_directions(noise: &NoiseModel) -> Result<[Vec3; 3]> {
    match noise {
        NoiseModel::ThreeDirections { directions } => Ok(*directions),
        NoiseModel::ScalarProfile { .. } => Err(Error::InvalidNoiseModel(
            "three-direction noise is required".into(),
        )),
    }
}

pub fn build_reversal_plan(
    delta: f64,
    horizon: f64,
    p: &PhysicalParams,
    noise: &NoiseModel,
    g: &Grid1D,
) -> Result<ReversalPlan> {
    noise.validate(Some(g))?;
    let dirs = three_directions(noise)?;
    let w = build_waypoints(delta, g)?;
    let r = choose_r(&w, horizon, p)?;
    let n = w.n_segments();
    let breakpoints: Vec<f64> = (0..=n).map(|i| horizon * i as f64 / n as f64).collect();
    let fields: Vec<Vec3> = w.points[1..]
        .iter()
        .map(|u| vec3::add(vec3::scale(r, *u), [0.0, p.beta * u[1], p.beta * u[2]]))
        .collect();
    let control: Vec<Vec<f64>> = fields
        .iter()
        .map(|k| {
            vec3::solve3(dirs, *k)
                .map(|phi| phi.to_vec())
                .ok_or_else(|| Error::InvalidNoiseModel("direction matrix is singular".into()))
        })
        .collect::<Result<_>>()?;
    let schedule = AppliedFieldSchedule::new(breakpoints.clone(), fields)?;
    let control = ControlPath::new(breakpoints, control)?;
    let cost = control.cost();
    Ok(ReversalPlan {
        waypoints: w,
        field_magnitude: r,
        horizon,
        schedule,
        control,
        cost,
    })
}

/// `½ ∫ |ψ|²`.
pub fn control_cost(psi: &ControlPath) -> f64 {
    psi.cost()
}

/// Trajectory events that a witness control may be asked to achieve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventTarget {
    /// Final state within H¹ distance `radius` of the uniform state `center`.
    TerminalBall { center: Vec3, radius: f64 },
    /// Every recorded state within H¹ distance `radius` of `center`.
    StayWithin { center: Vec3, radius: f64 },
}

impl EventTarget {
    /// Whether the stored record satisfies the event, and the terminal distance.
    pub fn check(&self, rec: &TrajectoryRecord, g: &Grid1D) -> Result<(bool, f64)> {
        let last = rec
            .states
            .last()
            .ok_or_else(|| invalid("empty trajectory"))?;
        match *self {
            Self::TerminalBall { center, radius } => {
                let d = grid::h1_distance_to_uniform(last, center, g);
                Ok((d < radius, d))
            }
            Self::StayWithin { center, radius } => {
                let ok = rec
                    .states
                    .iter()
                    .all(|s| grid::h1_distance_to_uniform(s, center, g) <= radius);
                Ok((ok, grid::h1_distance_to_uniform(last, center, g)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateWitness {
    pub cost: f64,
    pub achieved: bool,
    pub terminal_distance: f64,
}

/// Runs the skeleton flow under `system.control` and reports its cost as an
/// upper bound on the rate of `target` when the stored trajectory satisfies it.
pub fn rate_upper_bound(
    target: &EventTarget,
    system: &SkeletonSystem,
    m0: &MagnetizationField,
    dt: f64,
) -> Result<RateWitness> {
    let rec = system.solve(m0, dt, 1, None)?;
    let (achieved, terminal_distance) = target.check(&rec, &system.grid)?;
    Ok(RateWitness {
        cost: control_cost(&system.control),
        achieved,
        terminal_distance,
    })
}

/// `exp(−(cost + ξ)/ε)`, clamped to `(0, 1]`.
pub fn lower_bound_probability(cost: f64, xi: f64, eps: f64) -> Result<f64> {
    if !(cost >= 0.0 && cost.is_finite()) {
        return Err(invalid(format!("cost must be nonnegative, got {cost}")));
    }
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(invalid(format!("xi must be positive, got {xi}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    Ok((-(cost + xi) / eps).exp().clamp(f64::MIN_POSITIVE, 1.0))
}

/// Exponent coefficient `αβ r² / (8 max|a|² l (1+α²))` of the exit bound.
pub fn exit_rate(r: f64, p: &PhysicalParams, noise: &NoiseModel, g: &Grid1D) -> Result<f64> {
    let dirs = three_directions(noise)?;
    let amax = dirs.iter().map(|a| vec3::norm_sq(*a)).fold(0.0, f64::max);
    let a = p.alpha;
    Ok(a * p.beta * r * r / (8.0 * amax * g.length() * (1.0 + a * a)))
}

/// `exp((−rate(r) + ξ)/ε)` clamped to `[0, 1]`: bound on the probability of
/// leaving the H¹ ball of radius `r` around an axial state.
#[allow(clippy::too_many_arguments)]
pub fn upper_bound_probability(
    r: f64,
    rho: f64,
    xi: f64,
    eps: f64,
    p: &PhysicalParams,
    noise: &NoiseModel,
    g: &Grid1D,
) -> Result<f64> {
    if !(r > 0.0 && r < rho) {
        return Err(invalid(format!("need 0 < r < rho, got r = {r}, rho = {rho}")));
    }
    let radius = det::stability_radius(p, g);
    if rho > radius {
        return Err(invalid(format!(
            "rho = {rho} exceeds the stability radius {radius}"
        )));
    }
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(invalid(format!("xi must be nonnegative, got {xi}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    let rate = exit_rate(r, p, noise, g)?;
    Ok(((xi - rate) / eps).exp().min(1.0))
}

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> Result<(f64, f64)> {
    if n == 0 || successes > n {
        return Err(invalid(format!("invalid counts {successes}/{n}")));
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    // At p = 0 or 1 one end is exactly 0 or 1; rounding would miss it by an ulp.
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (centre + half).min(1.0) };
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    /// Terminal H¹ distance to `(1,0,0)` below `delta`.
    Reversal { delta: f64 },
    /// H¹ distance from the initial state reaches `rho` at some step.
    Exit { rho: f64 },
}

impl Event {
    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            Self::Reversal { delta } => delta,
            Self::Exit { rho } => rho,
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(format!("event radius must be positive, got {v}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEstimate {
    pub event: Event,
    pub p_hat: f64,
    pub wilson_95: (f64, f64),
    pub n_success: usize,
    pub n_paths: usize,
    pub n_failures: usize,
    /// More than 1% of the paths failed.
    pub degraded: bool,
}

fn estimate_from_counts(event: Event, n_success: usize, n_ok: usize, n_paths: usize) -> Result<EventEstimate> {
    let n_failures = n_paths - n_ok;
    if n_ok == 0 {
        return Err(Error::MeasurementFailure("every path failed".into()));
    }
    Ok(EventEstimate {
        event,
        p_hat: n_success as f64 / n_ok as f64,
        wilson_95: wilson_interval(n_success, n_ok, Z_95)?,
        n_success,
        n_paths,
        n_failures,
        degraded: n_failures as f64 > DEGRADED_FRACTION * n_paths as f64,
    })
}

/// Monte-Carlo estimate of the event probability with a Wilson 95% interval.
///
/// With `ε = 0` every path is the skeleton trajectory, so it is solved once.
pub fn estimate_event_probability(
    cfg: &SdeRunConfig,
    m0: &MagnetizationField,
    event: Event,
    n_paths: usize,
    base_seed: u64,
) -> Result<EventEstimate> {
    if n_paths < 100 {
        return Err(invalid(format!("n_paths must be at least 100, got {n_paths}")));
    }
    event.validate()?;
    cfg.validate()?;
    if cfg.params.eps == 0.0 {
        let sys = SkeletonSystem::new(
            cfg.grid,
            cfg.params,
            cfg.noise.clone(),
            cfg.applied_field.clone(),
            cfg.control.clone(),
        )?;
        let rec = sys.solve(m0, cfg.dt, 1, None)?;
        let hit = match event {
            Event::Reversal { delta } => {
                EventTarget::TerminalBall { center: vec3::E1, radius: delta }
                    .check(&rec, &cfg.grid)?
                    .0
            }
            Event::Exit { rho } => rec
                .distances_to(m0, &cfg.grid)?
                .into_iter()
                .any(|d| d >= rho),
        };
        return estimate_from_counts(event, if hit { n_paths } else { 0 }, n_paths, n_paths);
    }
    let delta = match event {
        Event::Reversal { delta } => delta,
        Event::Exit { .. } => 0.0,
    };
    let ens = sde::simulate_ensemble(cfg, m0, n_paths, base_seed, delta)?;
    let n_success = ens
        .summaries
        .iter()
        .filter(|s| match event {
            Event::Reversal { .. } => s.reversed,
            Event::Exit { rho } => s.max_excursion >= rho,
        })
        .count();
    estimate_from_counts(event, n_success, ens.summaries.len(), n_paths)
}
