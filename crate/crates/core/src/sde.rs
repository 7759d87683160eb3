//! Stochastic integration of the LLG equation with 1 or 3 noise channels.
//!
//! Two independent discretizations are provided: a projected Heun scheme
//! that targets the Stratonovich integral directly, and a projected
//! Euler-Maruyama scheme whose drift carries the Ito correction. Both
//! renormalize every node after each step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::det::{self, ControlPath, Diagnostics, Forcing, TrajectoryRecord};
use crate::error::{invalid, Error, Result};
use crate::grid::{self, Grid1D, MagnetizationField};
use crate::model::{self, AppliedFieldSchedule, NoiseModel, PhysicalParams};
use crate::vec3::{self, Vec3};

/// Environment variable holding the ensemble worker count (`0` or unset: all cores).
pub const THREADS_ENV: &str = "LLG1D_THREADS";

/// Counter-based seed for path `index` of an ensemble (splitmix64 finalizer).
pub fn split_seed(base_seed: u64, index: u64) -> u64 {
    let mut z = base_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Gaussian increments `dW ~ N(0, dt)` per channel, reproducible from a seed.
#[derive(Debug, Clone)]
pub struct BrownianDriver {
    seed: u64,
    n_channels: usize,
    dt: f64,
    n_steps: usize,
    taken: usize,
    sqrt_dt: f64,
    rng: ChaCha8Rng,
}

impl BrownianDriver {
    pub fn new(seed: u64, n_channels: usize, dt: f64, n_steps: usize) -> Result<Self> {
        if n_channels != 1 && n_channels != 3 {
            return Err(invalid(format!("n_channels must be 1 or 3, got {n_channels}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            seed,
            n_channels,
            dt,
            n_steps,
            taken: 0,
            sqrt_dt: dt.sqrt(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Next increment; unused channels are zero. `None` after `n_steps` draws.
    pub fn next_increment(&mut self) -> Option<Vec3> {
        if self.taken == self.n_steps {
            return None;
        }
        self.taken += 1;
        let mut dw = vec3::ZERO;
        for c in dw.iter_mut().take(self.n_channels) {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *c = self.sqrt_dt * z;
        }
        Some(dw)
    }

    /// All remaining increments.
    pub fn increments(mut self) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(self.n_steps - self.taken);
        while let Some(dw) = self.next_increment() {
            out.push(dw);
        }
        out
    }
}

/// Sums consecutive groups of `factor` increments: the same Brownian path
/// sampled on a grid `factor` times coarser.
pub fn coarsen_increments(fine: &[Vec3], factor: usize) -> Result<Vec<Vec3>> {
    if factor == 0 || !fine.len().is_multiple_of(factor) {
        return Err(invalid(format!(
            "cannot coarsen {} increments by {factor}",
            fine.len()
        )));
    }
    Ok(fine
        .chunks(factor)
        .map(|c| c.iter().fold(vec3::ZERO, |a, b| vec3::add(a, *b)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdeScheme {
    HeunStratonovich,
    EulerItoCorrected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdeRunConfig {
    pub scheme: SdeScheme,
    pub grid: Grid1D,
    pub params: PhysicalParams,
    pub noise: NoiseModel,
    pub control: ControlPath,
    pub applied_field: AppliedFieldSchedule,
    pub dt: f64,
    pub seed: u64,
    pub record_every: usize,
    /// Drops the Ito correction from the Euler scheme. Only meaningful as a
    /// negative control: the resulting scheme targets the wrong law.
    pub zero_ito_correction: bool,
}

impl SdeRunConfig {
    pub fn new(
        scheme: SdeScheme,
        grid: Grid1D,
        params: PhysicalParams,
        noise: NoiseModel,
        dt: f64,
        seed: u64,
    ) -> Self {
        Self {
            scheme,
            grid,
            params,
            noise,
            control: ControlPath::zero(),
            applied_field: AppliedFieldSchedule::zero(),
            dt,
            seed,
            record_every: 1,
            zero_ito_correction: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate_dynamics()?;
        self.noise.validate(Some(&self.grid))?;
        self.control.validate()?;
        self.applied_field.validate()?;
        if let Some(c) = self.control.n_channels() {
            if c != self.noise.n_channels() {
                return Err(invalid(format!(
                    "control has {c} channels but the noise model has {}",
                    self.noise.n_channels()
                )));
            }
        }
        if self.record_every == 0 {
            return Err(invalid("record_every must be at least 1"));
        }
        det::step_count(self.params.horizon, self.dt)?;
        Ok(())
    }

    pub fn n_steps(&self) -> Result<usize> {
        det::step_count(self.params.horizon, self.dt)
    }

    fn forcing(&self, t: f64, dt: f64) -> Forcing {
        let mid = t + 0.5 * dt;
        Forcing {
            applied: self.applied_field.at(mid),
            control: self.control.at(mid).to_vec(),
        }
    }

    fn drift(&self, m: &MagnetizationField, forcing: &Forcing) -> MagnetizationField {
        det::drift_field(m, forcing, &self.params, &self.noise, &self.grid)
    }

    /// `Σ_c σ_c(m) dW_c` at every node.
    fn noise_sum(&self, m: &MagnetizationField, dw: &[f64]) -> MagnetizationField {
        let alpha = self.params.alpha;
        MagnetizationField::new(
            m.values
                .iter()
                .enumerate()
                .map(|(i, mv)| {
                    dw.iter().enumerate().fold(vec3::ZERO, |acc, (c, w)| {
                        vec3::axpy(acc, *w, model::channel_vector(*mv, self.noise.channel_at(c, i), alpha))
                    })
                })
                .collect(),
        )
    }
}

fn check_dw(dw: &[f64], cfg: &SdeRunConfig) -> Result<()> {
    if dw.len() != cfg.noise.n_channels() {
        return Err(invalid(format!(
            "expected {} Brownian increments, got {}",
            cfg.noise.n_channels(),
            dw.len()
        )));
    }
    if dw.iter().any(|w| !w.is_finite()) {
        return Err(invalid("non-finite Brownian increment"));
    }
    Ok(())
}

/// One projected Stratonovich-Heun step. Inputs (applied field, control) are
/// frozen at the step midpoint.
pub fn heun_stratonovich_step(
    m: &MagnetizationField,
    t: f64,
    dt: f64,
    dw: &[f64],
    cfg: &SdeRunConfig,
) -> Result<MagnetizationField> {
    check_dw(dw, cfg)?;
    let forcing = cfg.forcing(t, dt);
    let b0 = cfg.drift(m, &forcing);
    let noisy = cfg.params.eps != 0.0;
    let s = cfg.params.eps.sqrt();
    let mut predictor = det::axpy_field(m, dt, &b0);
    let n0 = noisy.then(|| cfg.noise_sum(m, dw));
    if let Some(n0) = &n0 {
        predictor = det::axpy_field(&predictor, s, n0);
    }
    let b1 = cfg.drift(&predictor, &forcing);
    let mut next = det::heun_combine(m, &b0, &b1, dt);
    if let Some(n0) = &n0 {
        let n1 = cfg.noise_sum(&predictor, dw);
        for ((v, a), b) in next.values.iter_mut().zip(&n0.values).zip(&n1.values) {
            *v = vec3::axpy(*v, 0.5 * s, vec3::add(*a, *b));
        }
    }
    det::project_to_sphere(next, t + dt)
}

/// One projected Euler-Maruyama step of the Ito form of the equation.
pub fn euler_ito_corrected_step(
    m: &MagnetizationField,
    t: f64,
    dt: f64,
    dw: &[f64],
    cfg: &SdeRunConfig,
) -> Result<MagnetizationField> {
    check_dw(dw, cfg)?;
    let forcing = cfg.forcing(t, dt);
    let b = cfg.drift(m, &forcing);
    let eps = cfg.params.eps;
    if eps == 0.0 {
        return det::project_to_sphere(det::axpy_field(m, dt, &b), t + dt);
    }
    let mut drift = b;
    if !cfg.zero_ito_correction {
        let corr = model::ito_correction_unchecked(m, &cfg.noise, cfg.params.alpha);
        drift = det::axpy_field(&drift, eps, &corr);
    }
    let next = det::axpy_field(m, dt, &drift);
    let next = det::axpy_field(&next, eps.sqrt(), &cfg.noise_sum(m, dw));
    det::project_to_sphere(next, t + dt)
}

fn step(
    m: &MagnetizationField,
    t: f64,
    dw: &[f64],
    cfg: &SdeRunConfig,
) -> Result<MagnetizationField> {
    match cfg.scheme {
        SdeScheme::HeunStratonovich => heun_stratonovich_step(m, t, cfg.dt, dw, cfg),
        SdeScheme::EulerItoCorrected => euler_ito_corrected_step(m, t, cfg.dt, dw, cfg),
    }
}

fn with_seed(e: Error, seed: u64) -> Error {
    match e {
        Error::StepFailure { time, reason, .. } => Error::StepFailure {
            time,
            seed: Some(seed),
            reason,
        },
        other => other,
    }
}

fn record(rec: &mut TrajectoryRecord, t: f64, m: &MagnetizationField, cfg: &SdeRunConfig) {
    rec.times.push(t);
    rec.diagnostics.push(Diagnostics::compute(
        m,
        cfg.applied_field.at(t),
        &cfg.params,
        &cfg.grid,
        None,
    ));
    rec.states.push(m.clone());
}

/// Trajectory driven by the given increments (one per step).
pub fn simulate_path_with_increments(
    cfg: &SdeRunConfig,
    m0: &MagnetizationField,
    increments: &[Vec3],
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    det::check_initial(m0, &cfg.grid)?;
    let n_steps = cfg.n_steps()?;
    if increments.len() != n_steps {
        return Err(invalid(format!(
            "expected {n_steps} increments, got {}",
            increments.len()
        )));
    }
    let nc = cfg.noise.n_channels();
    let mut rec = TrajectoryRecord {
        grid: Some(cfg.grid),
        ..Default::default()
    };
    let mut m = m0.clone();
    record(&mut rec, 0.0, &m, cfg);
    for (k, dw) in increments.iter().enumerate() {
        let t = k as f64 * cfg.dt;
        m = step(&m, t, &dw[..nc], cfg).map_err(|e| with_seed(e, cfg.seed))?;
        let done = k + 1;
        if done % cfg.record_every == 0 || done == n_steps {
            record(&mut rec, done as f64 * cfg.dt, &m, cfg);
        }
    }
    Ok(rec)
}

/// Trajectory driven by the Brownian driver seeded with `cfg.seed`.
pub fn simulate_path(cfg: &SdeRunConfig, m0: &MagnetizationField) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let driver = BrownianDriver::new(cfg.seed, cfg.noise.n_channels(), cfg.dt, cfg.n_steps()?)?;
    simulate_path_with_increments(cfg, m0, &driver.increments())
}

/// Terminal statistics of one ensemble path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub path_id: usize,
    pub seed: u64,
    pub dist_h1_plus: f64,
    pub dist_h1_minus: f64,
    /// Largest H¹ distance from the initial state over all steps.
    pub max_excursion: f64,
    /// Terminal H¹ distance to `(1, 0, 0)` below the ensemble's reversal radius.
    pub reversed: bool,
    pub terminal: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFailure {
    pub path_id: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub summaries: Vec<PathSummary>,
    pub failures: Vec<PathFailure>,
}

impl EnsembleResult {
    pub fn n_failures(&self) -> usize {
        self.failures.len()
    }

    pub fn n_paths(&self) -> usize {
        self.summaries.len() + self.failures.len()
    }
}

fn run_summary(
    cfg: &SdeRunConfig,
    m0: &MagnetizationField,
    path_id: usize,
    seed: u64,
    reversal_delta: f64,
) -> Result<PathSummary> {
    let n_steps = cfg.n_steps()?;
    let mut driver = BrownianDriver::new(seed, cfg.noise.n_channels(), cfg.dt, n_steps)?;
    let nc = cfg.noise.n_channels();
    let mut m = m0.clone();
    let mut max_excursion: f64 = 0.0;
    let mut k = 0usize;
    while let Some(dw) = driver.next_increment() {
        m = step(&m, k as f64 * cfg.dt, &dw[..nc], cfg).map_err(|e| with_seed(e, seed))?;
        k += 1;
        let d = grid::h1_distance(&m, m0, &cfg.grid)?;
        max_excursion = max_excursion.max(d);
    }
    let dist_h1_plus = grid::h1_distance_to_uniform(&m, vec3::E1, &cfg.grid);
    let n = m.len() as f64;
    let mean = m.values.iter().fold(vec3::ZERO, |a, b| vec3::add(a, *b));
    Ok(PathSummary {
        path_id,
        seed,
        dist_h1_plus,
        dist_h1_minus: grid::h1_distance_to_uniform(&m, [-1.0, 0.0, 0.0], &cfg.grid),
        max_excursion,
        reversed: dist_h1_plus < reversal_delta,
        terminal: vec3::scale(1.0 / n, mean),
    })
}

/// Worker count from [`THREADS_ENV`]; `0`, unset or unparsable mean "all cores".
pub fn configured_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .unwrap_or(0)
}

/// Runs `n_paths` independent paths; path `i` uses `split_seed(base_seed, i)`.
///
/// Results are in path order and do not depend on the worker count. Failed
/// paths are collected, not propagated.
pub fn simulate_ensemble(
    cfg: &SdeRunConfig,
    m0: &MagnetizationField,
    n_paths: usize,
    base_seed: u64,
    reversal_delta: f64,
) -> Result<EnsembleResult> {
    simulate_ensemble_with_threads(cfg, m0, n_paths, base_seed, reversal_delta, configured_threads())
}

/// [`simulate_ensemble`] with an explicit worker count (`0`: all cores).
pub fn simulate_ensemble_with_threads(
    cfg: &SdeRunConfig,
    m0: &MagnetizationField,
    n_paths: usize,
    base_seed: u64,
    reversal_delta: f64,
    threads: usize,
) -> Result<EnsembleResult> {
    if n_paths == 0 {
        return Err(invalid("n_paths must be at least 1"));
    }
    cfg.validate()?;
    det::check_initial(m0, &cfg.grid)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| invalid(format!("cannot build worker pool: {e}")))?;
    let outcomes: Vec<std::result::Result<PathSummary, PathFailure>> = pool.install(|| {
        (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let seed = split_seed(base_seed, i as u64);
                run_summary(cfg, m0, i, seed, reversal_delta).map_err(|e| PathFailure {
                    path_id: i,
                    seed,
                    message: e.to_string(),
                })
            })
            .collect()
    });
    let mut result = EnsembleResult {
        summaries: Vec::with_capacity(n_paths),
        failures: Vec::new(),
    };
    for o in outcomes {
        match o {
            Ok(s) => result.summaries.push(s),
            Err(f) => result.failures.push(f),
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::det::SkeletonSystem;
    use crate::vec3::{E1, E3};

    fn rotation_cfg(scheme: SdeScheme, eps: f64, horizon: f64, dt: f64) -> SdeRunConfig {
        let g = Grid1D::new(1.0, 3).unwrap();
        let noise = NoiseModel::scalar_profile(MagnetizationField::uniform(3, E3), &g).unwrap();
        let p = PhysicalParams::undamped(0.0, eps, horizon).unwrap();
        SdeRunConfig::new(scheme, g, p, noise, dt, 7)
    }

    #[test]
    fn split_seed_is_injective_on_small_range() {
        let mut seen: Vec<u64> = (0..10_000).map(|i| split_seed(42, i)).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 10_000);
        assert_ne!(split_seed(1, 0), split_seed(2, 0));
    }

    #[test]
    fn driver_is_reproducible_and_bounded() {
        let a = BrownianDriver::new(5, 3, 0.01, 50).unwrap().increments();
        let b = BrownianDriver::new(5, 3, 0.01, 50).unwrap().increments();
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
        let one = BrownianDriver::new(5, 1, 0.01, 50).unwrap().increments();
        assert!(one.iter().all(|w| w[1] == 0.0 && w[2] == 0.0));
        assert!(BrownianDriver::new(5, 2, 0.01, 50).is_err());
    }

    #[test]
    fn driver_moments() {
        let dt = 0.01;
        let n = 1_000_000;
        let w = BrownianDriver::new(99, 1, dt, n).unwrap().increments();
        let mean = w.iter().map(|v| v[0]).sum::<f64>() / n as f64;
        let var = w.iter().map(|v| (v[0] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se_mean = (dt / n as f64).sqrt();
        let se_var = dt * (2.0 / (n - 1) as f64).sqrt();
        assert!(mean.abs() < 4.0 * se_mean, "mean {mean}");
        assert!((var - dt).abs() < 4.0 * se_var, "var {var}");
    }

    #[test]
    fn heun_with_zero_increment_matches_deterministic_step() {
        let g = Grid1D::new(1.0, 9).unwrap();
        let p = PhysicalParams::new(0.8, 0.3, 0.5, 1.0).unwrap();
        let mut cfg = SdeRunConfig::new(
            SdeScheme::HeunStratonovich,
            g,
            p,
            NoiseModel::standard_basis(),
            0.01,
            1,
        );
        cfg.applied_field = AppliedFieldSchedule::constant([0.2, 0.1, 0.0], 1.0);
        let m = MagnetizationField::from_fn(&g, |x| vec3::normalize([-1.0, 0.3 * x, 0.1]).unwrap());
        let sys = SkeletonSystem::uncontrolled(g, p, cfg.noise.clone(), cfg.applied_field.clone()).unwrap();
        let det_step = sys.step(&m, 0.0, 0.01).unwrap();
        let sde_step = heun_stratonovich_step(&m, 0.0, 0.01, &[0.0; 3], &cfg).unwrap();
        let d = sde_step.sub(&det_step).unwrap().max_norm();
        assert!(d < 1e-15, "{d}");
    }

    #[test]
    fn zero_noise_paths_equal_deterministic_output() {
        let g = Grid1D::new(1.0, 9).unwrap();
        let p = PhysicalParams::new(0.8, 0.3, 0.0, 0.5).unwrap();
        let control = ControlPath::constant(vec![0.1, -0.3, 0.2], 0.5);
        let schedule = AppliedFieldSchedule::constant([0.2, 0.1, 0.0], 0.5);
        let m0 = MagnetizationField::from_fn(&g, |x| vec3::normalize([-1.0, 0.3 * x, 0.1]).unwrap());
        let sys = SkeletonSystem::new(g, p, NoiseModel::standard_basis(), schedule.clone(), control.clone()).unwrap();
        let det_rec = sys.solve(&m0, 0.01, 5, None).unwrap();
        let mut cfg = SdeRunConfig::new(SdeScheme::HeunStratonovich, g, p, NoiseModel::standard_basis(), 0.01, 3);
        cfg.control = control.clone();
        cfg.applied_field = schedule.clone();
        cfg.record_every = 5;
        let sde_rec = simulate_path(&cfg, &m0).unwrap();
        assert_eq!(det_rec.states, sde_rec.states);

        cfg.scheme = SdeScheme::EulerItoCorrected;
        let sde_rec = simulate_path(&cfg, &m0).unwrap();
        let mut m = m0.clone();
        for k in 0..50 {
            let t = k as f64 * 0.01;
            let forcing = sys.forcing(t + 0.005);
            m = det::step_euler_projected(&m, t, 0.01, |x, _| Ok(sys.drift(x, &forcing))).unwrap();
        }
        assert_eq!(sde_rec.states.last().unwrap(), &m);
    }

    #[test]
    fn heun_rotation_step_matches_exact_angle() {
        let cfg = rotation_cfg(SdeScheme::HeunStratonovich, 1.0, 1.0, 0.01);
        let m = MagnetizationField::uniform(3, E1);
        for dw in [0.1, -0.05, 0.02] {
            let next = heun_stratonovich_step(&m, 0.0, 0.01, &[dw], &cfg).unwrap();
            let v = next.values[0];
            assert!((vec3::norm(v) - 1.0).abs() < 1e-15);
            // dm = m × e3 ∘ dW rotates e1 toward −e2.
            // Heun with frozen dW: angle atan(dW / (1 − dW²/2)) = dW + dW³/6 + O(dW⁵).
            let angle = (-v[1]).atan2(v[0]);
            let heun = dw.atan2(1.0 - 0.5 * dw * dw);
            assert!((angle - heun).abs() < 1e-15, "dw {dw} angle {angle}");
            assert!((angle - dw - dw.powi(3) / 6.0).abs() < dw.abs().powi(5), "dw {dw} angle {angle}");
        }
    }

    #[test]
    fn euler_with_zero_increment_and_eps_is_deterministic_euler() {
        let cfg = rotation_cfg(SdeScheme::EulerItoCorrected, 0.0, 1.0, 0.01);
        let m = MagnetizationField::uniform(3, E1);
        assert_eq!(euler_ito_corrected_step(&m, 0.0, 0.01, &[0.0], &cfg).unwrap(), m);
    }

    #[test]
    fn paths_are_reproducible_and_saturated() {
        let g = Grid1D::new(1.0, 11).unwrap();
        let p = PhysicalParams::new(1.0, 0.5, 0.3, 0.2).unwrap();
        for scheme in [SdeScheme::HeunStratonovich, SdeScheme::EulerItoCorrected] {
            let cfg = SdeRunConfig::new(scheme, g, p, NoiseModel::standard_basis(), 1e-3, 11);
            let m0 = MagnetizationField::uniform(11, [-1.0, 0.0, 0.0]);
            let a = simulate_path(&cfg, &m0).unwrap();
            let b = simulate_path(&cfg, &m0).unwrap();
            assert_eq!(a, b);
            assert!(a.max_sphere_residual() <= 1e-10);
            assert_eq!(a.times.len(), 201);
        }
    }

    #[test]
    fn single_path_ensemble_reproduces_simulate_path() {
        let g = Grid1D::new(1.0, 7).unwrap();
        let p = PhysicalParams::new(1.0, 0.5, 0.3, 0.1).unwrap();
        let cfg0 = SdeRunConfig::new(SdeScheme::HeunStratonovich, g, p, NoiseModel::standard_basis(), 1e-3, 0);
        let m0 = MagnetizationField::uniform(7, [-1.0, 0.0, 0.0]);
        let ens = simulate_ensemble_with_threads(&cfg0, &m0, 1, 17, 0.1, 1).unwrap();
        let mut cfg = cfg0.clone();
        cfg.seed = split_seed(17, 0);
        let rec = simulate_path(&cfg, &m0).unwrap();
        let last = rec.states.last().unwrap();
        let s = &ens.summaries[0];
        assert_eq!(s.seed, cfg.seed);
        assert_eq!(s.dist_h1_plus, grid::h1_distance_to_uniform(last, E1, &g));
        let max_exc = rec
            .states
            .iter()
            .map(|x| grid::h1_distance(x, &m0, &g).unwrap())
            .fold(0.0, f64::max);
        assert_eq!(s.max_excursion, max_exc);
    }

    #[test]
    fn ensemble_is_independent_of_worker_count() {
        let g = Grid1D::new(1.0, 5).unwrap();
        let p = PhysicalParams::new(1.0, 0.5, 0.5, 0.05).unwrap();
        let cfg = SdeRunConfig::new(SdeScheme::EulerItoCorrected, g, p, NoiseModel::standard_basis(), 1e-3, 0);
        let m0 = MagnetizationField::uniform(5, [-1.0, 0.0, 0.0]);
        let a = simulate_ensemble_with_threads(&cfg, &m0, 64, 3, 0.1, 1).unwrap();
        let b = simulate_ensemble_with_threads(&cfg, &m0, 64, 3, 0.1, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_paths(), 64);
    }

    #[test]
    fn small_noise_short_horizon_never_reverses() {
        let g = Grid1D::new(1.0, 5).unwrap();
        let p = PhysicalParams::new(1.0, 1.0, 1e-4, 0.05).unwrap();
        let cfg = SdeRunConfig::new(SdeScheme::HeunStratonovich, g, p, NoiseModel::standard_basis(), 5e-3, 0);
        let m0 = MagnetizationField::uniform(5, [-1.0, 0.0, 0.0]);
        let ens = simulate_ensemble(&cfg, &m0, 1000, 9, 0.1).unwrap();
        assert_eq!(ens.n_failures(), 0);
        assert!(ens.summaries.iter().all(|s| !s.reversed));
    }

    #[test]
    fn rejects_bad_increments() {
        let cfg = rotation_cfg(SdeScheme::HeunStratonovich, 1.0, 1.0, 0.01);
        let m = MagnetizationField::uniform(3, E1);
        assert!(heun_stratonovich_step(&m, 0.0, 0.01, &[0.1, 0.2], &cfg).is_err());
        assert!(heun_stratonovich_step(&m, 0.0, 0.01, &[f64::NAN], &cfg).is_err());
    }
}
