//! Deterministic and controlled (skeleton) Landau-Lifshitz flows.
//!
//! The skeleton right-hand side is the LLG drift of the effective field plus
//! the noise channels driven by a deterministic control:
//!
//! ```text
//! dm/dt = m × g − α m × (m × g) + Σ_j σ_j(m) ψ_j(t),   g = Δm − β(0, m₂, m₃) + K(t)
//! ```
//!
//! Integration is projected Heun: a second-order step followed by nodewise
//! renormalization onto the unit sphere.

pub mod galerkin;
pub mod stability;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{self, Grid1D, MagnetizationField, SATURATION_TOL};
use crate::model::{self, AppliedFieldSchedule, NoiseModel, PhysicalParams};
use crate::vec3::{self, Vec3};

pub use stability::{
    check_uandz, decay_rate_gamma, field_threshold, fit_exponential_rate, measure_decay,
    stability_radius, UandzReport,
};

/// Nodes whose norm drops below this before renormalization abort the step.
pub const COLLAPSE_TOL: f64 = 1e-6;

/// Piecewise-constant control `ψ(t)`, one value per channel and segment.
///
/// An empty path is the zero control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ControlPath {
    pub breakpoints: Vec<f64>,
    pub segment_values: Vec<Vec<f64>>,
}

impl ControlPath {
    pub fn new(breakpoints: Vec<f64>, segment_values: Vec<Vec<f64>>) -> Result<Self> {
        let c = Self {
            breakpoints,
            segment_values,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(value: Vec<f64>, horizon: f64) -> Self {
        Self {
            breakpoints: vec![0.0, horizon],
            segment_values: vec![value],
        }
    }

    pub fn validate(&self) -> Result<()> {
        model::validate_breakpoints(&self.breakpoints, self.segment_values.len(), "control")?;
        if let Some(first) = self.segment_values.first() {
            if self.segment_values.iter().any(|s| s.len() != first.len()) {
                return Err(invalid("control: segments have different channel counts"));
            }
        }
        if self.segment_values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("control: non-finite value"));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.segment_values.iter().flatten().all(|v| *v == 0.0)
    }

    /// Channel count, or `None` for an empty path.
    pub fn n_channels(&self) -> Option<usize> {
        self.segment_values.first().map(Vec::len)
    }

    /// Control value at `t`; an empty slice means zero on every channel.
    pub fn at(&self, t: f64) -> &[f64] {
        match model::segment_index(&self.breakpoints, t) {
            Some(i) => &self.segment_values[i],
            None => &[],
        }
    }

    /// `½ ∫ |ψ|² dt`, exact for piecewise-constant paths.
    pub fn cost(&self) -> f64 {
        0.5 * self
            .breakpoints
            .windows(2)
            .zip(&self.segment_values)
            .map(|(w, v)| (w[1] - w[0]) * v.iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
    }

    /// Appends `other` after this path; `other` must start where this one ends.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.segment_values.is_empty() {
            return Ok(other.clone());
        }
        if other.segment_values.is_empty() {
            return Ok(self.clone());
        }
        if self.breakpoints.last() != other.breakpoints.first() {
            return Err(invalid("control paths are not contiguous"));
        }
        let mut breakpoints = self.breakpoints.clone();
        breakpoints.extend_from_slice(&other.breakpoints[1..]);
        let mut segment_values = self.segment_values.clone();
        segment_values.extend(other.segment_values.iter().cloned());
        Self::new(breakpoints, segment_values)
    }
}

/// Inputs frozen over a single time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing {
    pub applied: Vec3,
    pub control: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub l2: f64,
    pub h1: f64,
    pub linf: f64,
    pub energy: f64,
    pub sphere_residual: f64,
    pub dist_h1_plus: f64,
    pub dist_h1_minus: f64,
    /// H¹ distance to the run's reference state, when one was supplied.
    pub dist_h1_ref: Option<f64>,
}

impl Diagnostics {
    pub fn compute(
        m: &MagnetizationField,
        applied: Vec3,
        params: &PhysicalParams,
        g: &Grid1D,
        reference: Option<&MagnetizationField>,
    ) -> Self {
        let n = grid::norms_unchecked(m, g);
        let dist_h1_ref = reference.map(|r| {
            let d = m.sub(r).expect("reference conforms to grid");
            grid::norms_unchecked(&d, g).h1
        });
        Self {
            l2: n.l2,
            h1: n.h1,
            linf: n.linf,
            energy: model::energy_unchecked(m, applied, params.beta, g),
            sphere_residual: m.sphere_residual(),
            dist_h1_plus: grid::h1_distance_to_uniform(m, vec3::E1, g),
            dist_h1_minus: grid::h1_distance_to_uniform(m, [-1.0, 0.0, 0.0], g),
            dist_h1_ref,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryRecord {
    pub grid: Option<Grid1D>,
    pub times: Vec<f64>,
    pub states: Vec<MagnetizationField>,
    pub diagnostics: Vec<Diagnostics>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&MagnetizationField> {
        self.states.last()
    }

    pub fn max_sphere_residual(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| d.sphere_residual)
            .fold(0.0, f64::max)
    }

    /// H¹ distances of every recorded state to `reference`.
    pub fn distances_to(&self, reference: &MagnetizationField, g: &Grid1D) -> Result<Vec<f64>> {
        self.states
            .iter()
            .map(|s| grid::h1_distance(s, reference, g))
            .collect()
    }
}

/// Drift `m × g − α m × (m × g) + Σ_j σ_j(m) ψ_j`; `control` may be empty.
pub(crate) fn drift_field(
    m: &MagnetizationField,
    forcing: &Forcing,
    params: &PhysicalParams,
    noise: &NoiseModel,
    g: &Grid1D,
) -> MagnetizationField {
    let h = model::effective_field_unchecked(m, forcing.applied, params.beta, g);
    let alpha = params.alpha;
    let values = m
        .values
        .iter()
        .zip(&h.values)
        .enumerate()
        .map(|(i, (mv, hv))| {
            let mut out = model::llg_vector(*mv, *hv, alpha);
            for (c, psi) in forcing.control.iter().enumerate() {
                if *psi != 0.0 {
                    out = vec3::axpy(out, *psi, model::channel_vector(*mv, noise.channel_at(c, i), alpha));
                }
            }
            out
        })
        .collect();
    MagnetizationField::new(values)
}

/// Renormalizes every node; a collapsed or non-finite node is a step failure.
pub(crate) fn project_to_sphere(m: MagnetizationField, time: f64) -> Result<MagnetizationField> {
    let mut values = m.values;
    for (i, v) in values.iter_mut().enumerate() {
        let n = vec3::norm(*v);
        if !(n >= COLLAPSE_TOL && n.is_finite()) {
            return Err(Error::StepFailure {
                time,
                seed: None,
                reason: format!("node {i} has norm {n:e} before renormalization"),
            });
        }
        *v = vec3::scale(1.0 / n, *v);
    }
    Ok(MagnetizationField::new(values))
}

/// `m + s * d`, nodewise.
pub(crate) fn axpy_field(m: &MagnetizationField, s: f64, d: &MagnetizationField) -> MagnetizationField {
    MagnetizationField::new(
        m.values
            .iter()
            .zip(&d.values)
            .map(|(a, b)| vec3::axpy(*a, s, *b))
            .collect(),
    )
}

/// `m + (dt/2) (k1 + k2)`, nodewise; shared with the stochastic Heun scheme.
pub(crate) fn heun_combine(
    m: &MagnetizationField,
    k1: &MagnetizationField,
    k2: &MagnetizationField,
    dt: f64,
) -> MagnetizationField {
    let half = 0.5 * dt;
    MagnetizationField::new(
        m.values
            .iter()
            .zip(k1.values.iter().zip(&k2.values))
            .map(|(a, (b, c))| vec3::axpy(*a, half, vec3::add(*b, *c)))
            .collect(),
    )
}

/// One projected Heun step of `dm/dt = rhs(m, t)`.
pub fn step_rk2_projected<F>(
    m: &MagnetizationField,
    t: f64,
    dt: f64,
    rhs: F,
) -> Result<MagnetizationField>
where
    F: Fn(&MagnetizationField, f64) -> Result<MagnetizationField>,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("dt must be positive, got {dt}")));
    }
    let k1 = rhs(m, t)?;
    let predictor = axpy_field(m, dt, &k1);
    let k2 = rhs(&predictor, t + dt)?;
    project_to_sphere(heun_combine(m, &k1, &k2, dt), t + dt)
}

/// One projected explicit Euler step; the zero-noise partner of the Ito scheme.
pub fn step_euler_projected<F>(
    m: &MagnetizationField,
    t: f64,
    dt: f64,
    rhs: F,
) -> Result<MagnetizationField>
where
    F: Fn(&MagnetizationField, f64) -> Result<MagnetizationField>,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("dt must be positive, got {dt}")));
    }
    let k1 = rhs(m, t)?;
    project_to_sphere(axpy_field(m, dt, &k1), t + dt)
}

/// Number of steps of size `dt` that cover `horizon`, if `dt` divides it.
pub(crate) fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("dt must be positive, got {dt}")));
    }
    let n = (horizon / dt).round();
    if n < 1.0 || (n * dt - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(invalid(format!("dt = {dt} does not divide the horizon {horizon}")));
    }
    Ok(n as usize)
}

pub(crate) fn check_initial(m0: &MagnetizationField, g: &Grid1D) -> Result<()> {
    if m0.len() != g.n_points() {
        return Err(invalid(format!(
            "initial state has {} nodes but grid has {}",
            m0.len(),
            g.n_points()
        )));
    }
    let r = m0.sphere_residual();
    if r > SATURATION_TOL {
        return Err(Error::PreconditionViolation(format!(
            "initial state is not saturated (max | |m| - 1 | = {r:e})"
        )));
    }
    Ok(())
}

/// Everything that defines a skeleton (controlled, noise-free) run.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSystem {
    pub grid: Grid1D,
    pub params: PhysicalParams,
    pub noise: NoiseModel,
    pub schedule: AppliedFieldSchedule,
    pub control: ControlPath,
}

impl SkeletonSystem {
    pub fn new(
        grid: Grid1D,
        params: PhysicalParams,
        noise: NoiseModel,
        schedule: AppliedFieldSchedule,
        control: ControlPath,
    ) -> Result<Self> {
        params.validate_dynamics()?;
        noise.validate(Some(&grid))?;
        schedule.validate()?;
        control.validate()?;
        if let Some(c) = control.n_channels() {
            if c != noise.n_channels() {
                return Err(invalid(format!(
                    "control has {c} channels but the noise model has {}",
                    noise.n_channels()
                )));
            }
        }
        Ok(Self {
            grid,
            params,
            noise,
            schedule,
            control,
        })
    }

    /// Uncontrolled flow under a given applied field.
    pub fn uncontrolled(
        grid: Grid1D,
        params: PhysicalParams,
        noise: NoiseModel,
        schedule: AppliedFieldSchedule,
    ) -> Result<Self> {
        Self::new(grid, params, noise, schedule, ControlPath::zero())
    }

    pub fn forcing(&self, t: f64) -> Forcing {
        Forcing {
            applied: self.schedule.at(t),
            control: self.control.at(t).to_vec(),
        }
    }

    pub fn drift(&self, m: &MagnetizationField, forcing: &Forcing) -> MagnetizationField {
        drift_field(m, forcing, &self.params, &self.noise, &self.grid)
    }

    /// Skeleton right-hand side with inputs evaluated at `t`.
    pub fn rhs(&self, m: &MagnetizationField, t: f64) -> Result<MagnetizationField> {
        check_initial_shape(m, &self.grid)?;
        Ok(self.drift(m, &self.forcing(t)))
    }

    /// One projected Heun step with inputs sampled at the step midpoint.
    pub fn step(&self, m: &MagnetizationField, t: f64, dt: f64) -> Result<MagnetizationField> {
        let forcing = self.forcing(t + 0.5 * dt);
        step_rk2_projected(m, t, dt, |x, _| Ok(self.drift(x, &forcing)))
    }

    /// Integrates over `[0, horizon]`, recording every `record_every` steps
    /// and at the final time.
    pub fn solve(
        &self,
        m0: &MagnetizationField,
        dt: f64,
        record_every: usize,
        reference: Option<&MagnetizationField>,
    ) -> Result<TrajectoryRecord> {
        check_initial(m0, &self.grid)?;
        if record_every == 0 {
            return Err(invalid("record_every must be at least 1"));
        }
        if let Some(r) = reference {
            check_initial_shape(r, &self.grid)?;
        }
        let n_steps = step_count(self.params.horizon, dt)?;
        let mut rec = TrajectoryRecord {
            grid: Some(self.grid),
            ..Default::default()
        };
        let mut m = m0.clone();
        self.record(&mut rec, 0.0, &m, reference);
        for step in 0..n_steps {
            let t = step as f64 * dt;
            m = self.step(&m, t, dt)?;
            let done = step + 1;
            if done % record_every == 0 || done == n_steps {
                self.record(&mut rec, done as f64 * dt, &m, reference);
            }
        }
        Ok(rec)
    }

    fn record(
        &self,
        rec: &mut TrajectoryRecord,
        t: f64,
        m: &MagnetizationField,
        reference: Option<&MagnetizationField>,
    ) {
        rec.times.push(t);
        rec.diagnostics.push(Diagnostics::compute(
            m,
            self.schedule.at(t),
            &self.params,
            &self.grid,
            reference,
        ));
        rec.states.push(m.clone());
    }
}

fn check_initial_shape(m: &MagnetizationField, g: &Grid1D) -> Result<()> {
    if m.len() != g.n_points() {
        return Err(invalid(format!(
            "field has {} nodes but grid has {}",
            m.len(),
            g.n_points()
        )));
    }
    Ok(())
}

/// Skeleton right-hand side as a free function.
#[allow(clippy::too_many_arguments)]
pub fn rhs_skeleton(
    m: &MagnetizationField,
    t: f64,
    psi: &ControlPath,
    k: &AppliedFieldSchedule,
    p: &PhysicalParams,
    noise: &NoiseModel,
    g: &Grid1D,
) -> Result<MagnetizationField> {
    check_initial_shape(m, g)?;
    noise.validate(Some(g))?;
    let forcing = Forcing {
        applied: k.at(t),
        control: psi.at(t).to_vec(),
    };
    if !forcing.control.is_empty() && forcing.control.len() != noise.n_channels() {
        return Err(invalid("control channel count does not match the noise model"));
    }
    Ok(drift_field(m, &forcing, p, noise, g))
}

/// Projected Heun trajectory of the skeleton equation over `[0, p.horizon]`.
#[allow(clippy::too_many_arguments)]
pub fn solve_deterministic(
    m0: &MagnetizationField,
    psi: &ControlPath,
    k: &AppliedFieldSchedule,
    p: &PhysicalParams,
    noise: &NoiseModel,
    g: &Grid1D,
    dt: f64,
    record_every: usize,
) -> Result<TrajectoryRecord> {
    let sys = SkeletonSystem::new(*g, *p, noise.clone(), k.clone(), psi.clone())?;
    sys.solve(m0, dt, record_every, None)
}
