//! Self-check suite behind `llg1d verify`.
//!
//! `quick` runs closed-form and short-run checks; `full` adds refinement
//! sweeps, the scheme-equivalence experiment, the stability and decay runs and
//! the end-to-end reversal.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::det::{self, galerkin::GalerkinSolver, ControlPath, SkeletonSystem};
use crate::grid::{self, Grid1D, MagnetizationField};
use crate::ldp::{self, Z_95};
use crate::model::{self, AppliedFieldSchedule, NoiseModel, PhysicalParams};
use crate::sde::{self, SdeRunConfig, SdeScheme};
use crate::vec3::{self, Vec3, E1, E2, E3};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VerifyOptions {
    pub full: bool,
    /// Test hook: drop the Ito correction in the scheme-equivalence check.
    pub zero_ito_correction: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} ({:.2}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds
        )
    }
}

type CheckResult = std::result::Result<String, String>;

fn run_check(name: &'static str, f: impl FnOnce() -> CheckResult) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    CheckOutcome {
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn ensure(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<T>(r: crate::Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// Runs the suite and returns one outcome per check.
pub fn run_suite(opts: &VerifyOptions) -> Vec<CheckOutcome> {
    let mut out = vec![
        run_check("closed_form_constants", check_constants),
        run_check("laplacian_and_basis", check_grid_ops),
        run_check("harmonic_identity_uniform", check_harmonic_uniform),
        run_check("ito_bracket_finite_difference", check_ito_bracket),
        run_check("reversal_plan_geometry", check_plan_geometry),
        run_check("sphere_constraint_short_runs", check_sphere_short),
        run_check("uniformity_and_ode_oracle", check_uniformity),
        run_check("zero_noise_reduction", check_zero_noise),
        run_check("galerkin_l2_conservation", check_galerkin),
    ];
    if opts.full {
        let zero = opts.zero_ito_correction;
        out.extend([
            run_check("harmonic_identity_order", check_harmonic_order),
            run_check("heun_self_convergence", check_heun_order),
            run_check("heun_strong_order_rotation", check_strong_order),
            run_check("scheme_weak_equivalence", move || check_weak(zero)),
            run_check("stability_ball_monotone", check_stability),
            run_check("decay_bound", check_decay),
            run_check("reversal_end_to_end", check_reversal),
        ]);
    }
    out
}

fn check_constants() -> CheckResult {
    let g = e(Grid1D::new(1.0, 11))?;
    let p = e(PhysicalParams::new(1.0, 0.1, 0.0, 1.0))?;
    let r = det::stability_radius(&p, &g);
    ensure((r - 1.0 / 24.0).abs() < 1e-16, format!("stability radius {r}"))?;
    let gamma = det::decay_rate_gamma(&p, 10.0);
    ensure((gamma - 10.4).abs() < 1e-12, format!("gamma {gamma}"))?;
    let th = det::field_threshold(&p);
    ensure((th - 0.8 / 3.0).abs() < 1e-15, format!("threshold {th}"))?;
    let (lo, hi) = e(ldp::wilson_interval(400, 400, Z_95))?;
    ensure((lo - 0.9905).abs() < 1e-4 && hi == 1.0, format!("wilson [{lo}, {hi}]"))?;
    let q = e(PhysicalParams::new(1.0, 1.0, 0.0, 1.0))?;
    let rate = e(ldp::exit_rate(0.04, &q, &NoiseModel::standard_basis(), &g))?;
    ensure((rate - 1e-4).abs() < 1e-18, format!("exit rate {rate}"))?;
    Ok(format!("radius {r:.6}, gamma {gamma}, exit rate {rate:e}"))
}

fn check_grid_ops() -> CheckResult {
    let g = e(Grid1D::new(1.0, 65))?;
    let uniform = MagnetizationField::uniform(65, E2);
    let lap = e(grid::laplacian(&uniform, &g))?;
    ensure(lap.max_norm() == 0.0, "laplacian of a uniform field is not zero")?;
    let basis = e(grid::neumann_eigenpairs(&g, 65))?;
    let mut worst: f64 = 0.0;
    for (i, a) in basis.iter().enumerate() {
        for b in &basis[i..] {
            let ip: f64 = a
                .eigenfunction
                .iter()
                .zip(&b.eigenfunction)
                .enumerate()
                .map(|(k, (x, y))| g.weight(k) * x * y)
                .sum();
            let want = if a.index == b.index { 1.0 } else { 0.0 };
            worst = worst.max((ip - want).abs());
        }
    }
    ensure(worst < 1e-12, format!("basis orthonormality error {worst:e}"))?;
    Ok(format!("orthonormality error {worst:.2e}"))
}

fn check_harmonic_uniform() -> CheckResult {
    let g = e(Grid1D::new(2.0, 33))?;
    let v = e(vec3::normalize([0.3, -0.4, 0.5]).ok_or(crate::Error::InvalidArgument("zero".into())))?;
    let r = e(model::harmonic_identity_residual(&MagnetizationField::uniform(33, v), &g))?.max_norm();
    ensure(r == 0.0, format!("residual {r:e} on a uniform field"))?;
    Ok("exactly zero".into())
}

fn smooth_field(g: &Grid1D) -> MagnetizationField {
    let l = g.length();
    MagnetizationField::from_fn(g, |x| {
        let c1 = (std::f64::consts::PI * x / l).cos();
        let c2 = (2.0 * std::f64::consts::PI * x / l).cos();
        vec3::normalize([1.2 + 0.3 * c2, 0.8 * c1, 0.5 * c2 - 0.2]).expect("nonzero")
    })
}

fn check_harmonic_order() -> CheckResult {
    let mut res = Vec::new();
    for k in 0..5 {
        let g = e(Grid1D::new(1.0, 16 * (1 << k) + 1))?;
        res.push(e(model::harmonic_identity_residual(&smooth_field(&g), &g))?.max_norm());
    }
    let orders: Vec<f64> = res.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    ensure(
        orders.iter().all(|o| (1.8..=2.2).contains(o)),
        format!("orders {orders:?}"),
    )?;
    Ok(format!("orders {orders:.3?}"))
}

fn check_ito_bracket() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let delta = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut rv = || [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let m = match vec3::normalize(rv()) {
            Some(m) => m,
            None => continue,
        };
        let b = rv();
        let alpha: f64 = rng.random_range(0.0..2.0);
        let sigma = |x: Vec3| model::channel_vector(x, b, alpha);
        let s0 = sigma(m);
        let fd = vec3::scale(0.5 / delta, vec3::sub(sigma(vec3::axpy(m, delta, s0)), s0));
        let exact = model::ito_bracket(m, b, alpha);
        let scale = vec3::norm(exact).max(vec3::norm(s0) * vec3::norm(b) * (1.0 + alpha));
        worst = worst.max(vec3::norm(vec3::sub(fd, exact)) / scale);
    }
    ensure(worst < 1e-4, format!("relative error {worst:e}"))?;
    Ok(format!("max relative error {worst:.2e}"))
}

fn check_plan_geometry() -> CheckResult {
    let g = e(Grid1D::new(1.0, 11))?;
    let w = e(ldp::build_waypoints(0.1, &g))?;
    ensure(w.n_segments() == 7, format!("N = {}", w.n_segments()))?;
    let p = e(PhysicalParams::new(1.0, 0.1, 0.0, 7.0))?;
    let noise = e(NoiseModel::three_directions([[1.0, 0.1, 0.0], [0.0, 1.0, 0.2], [0.3, 0.0, 1.0]]))?;
    let plan = e(ldp::build_reversal_plan(0.1, 7.0, &p, &noise, &g))?;
    let err = e(plan.reconstruction_error(&noise))?;
    ensure(err < 1e-10, format!("reconstruction error {err:e}"))?;
    let gamma = det::decay_rate_gamma(&p, plan.field_magnitude);
    let lhs = (1.0 / w.k()) * (-0.5 * gamma * 1.0).exp();
    ensure(lhs < w.eta, format!("decay requirement {lhs} >= eta {}", w.eta))?;
    Ok(format!("N = 7, R = {:.4}, cost = {:.4}", plan.field_magnitude, plan.cost))
}

fn tilted(g: &Grid1D, base: Vec3, amp: f64) -> MagnetizationField {
    let l = g.length();
    MagnetizationField::from_fn(g, |x| {
        let c = (std::f64::consts::PI * x / l).cos();
        vec3::normalize([base[0], base[1] + amp * (0.6 + c), base[2] + 0.5 * amp * c]).expect("nonzero")
    })
}

fn check_sphere_short() -> CheckResult {
    let g = e(Grid1D::new(1.0, 17))?;
    let p = e(PhysicalParams::new(0.7, 0.5, 0.2, 0.2))?;
    let m0 = tilted(&g, [-1.0, 0.0, 0.0], 0.4);
    let sys = e(SkeletonSystem::new(
        g,
        p,
        NoiseModel::standard_basis(),
        AppliedFieldSchedule::constant([1.0, 2.0, 0.0], 0.2),
        ControlPath::constant(vec![0.5, -0.5, 0.5], 0.2),
    ))?;
    let mut worst = e(sys.solve(&m0, 1e-3, 1, None))?.max_sphere_residual();
    for scheme in [SdeScheme::HeunStratonovich, SdeScheme::EulerItoCorrected] {
        let cfg = SdeRunConfig::new(scheme, g, p, NoiseModel::standard_basis(), 1e-3, 5);
        worst = worst.max(e(sde::simulate_path(&cfg, &m0))?.max_sphere_residual());
    }
    ensure(worst <= 1e-10, format!("sphere residual {worst:e}"))?;
    Ok(format!("max residual {worst:.2e}"))
}

/// Classical RK4 for a single spin under the same vector field.
fn ode_oracle(m0: Vec3, applied: Vec3, control: &[f64], dirs: [Vec3; 3], p: &PhysicalParams, dt: f64, n: usize) -> Vec3 {
    let f = |m: Vec3| {
        let h = [applied[0], applied[1] - p.beta * m[1], applied[2] - p.beta * m[2]];
        let mut out = model::llg_vector(m, h, p.alpha);
        for (j, c) in control.iter().enumerate() {
            out = vec3::axpy(out, *c, model::channel_vector(m, dirs[j], p.alpha));
        }
        out
    };
    let mut m = m0;
    for _ in 0..n {
        let k1 = f(m);
        let k2 = f(vec3::axpy(m, 0.5 * dt, k1));
        let k3 = f(vec3::axpy(m, 0.5 * dt, k2));
        let k4 = f(vec3::axpy(m, dt, k3));
        let s = vec3::add(vec3::add(k1, vec3::scale(2.0, k2)), vec3::add(vec3::scale(2.0, k3), k4));
        m = vec3::axpy(m, dt / 6.0, s);
    }
    m
}

fn check_uniformity() -> CheckResult {
    let g = e(Grid1D::new(1.0, 17))?;
    let p = e(PhysicalParams::new(0.5, 0.8, 0.0, 1.0))?;
    let dt = 1e-3;
    let control = vec![0.3, -0.2, 0.4];
    let applied = [0.2, 0.1, -0.3];
    let m0 = vec3::normalize([-1.0, 0.2, 0.1]).expect("nonzero");
    let sys = e(SkeletonSystem::new(
        g,
        p,
        NoiseModel::standard_basis(),
        AppliedFieldSchedule::constant(applied, 1.0),
        ControlPath::constant(control.clone(), 1.0),
    ))?;
    let rec = e(sys.solve(&MagnetizationField::uniform(17, m0), dt, 1, None))?;
    let spread = rec.states.iter().map(|s| s.spread()).fold(0.0, f64::max);
    ensure(spread <= 1e-10, format!("spread {spread:e}"))?;
    let oracle = ode_oracle(m0, applied, &control, [E1, E2, E3], &p, dt / 10.0, 10_000);
    let last = rec.states.last().expect("nonempty").values[0];
    let err = vec3::norm(vec3::sub(last, oracle));
    ensure(err < 10.0 * dt * dt, format!("ODE mismatch {err:e}"))?;
    Ok(format!("spread {spread:.1e}, ODE mismatch {err:.2e}"))
}

fn check_zero_noise() -> CheckResult {
    let g = e(Grid1D::new(1.0, 9))?;
    let p = e(PhysicalParams::new(1.0, 0.3, 0.0, 0.1))?;
    let m0 = tilted(&g, [-1.0, 0.0, 0.0], 0.3);
    let sys = e(SkeletonSystem::uncontrolled(g, p, NoiseModel::standard_basis(), AppliedFieldSchedule::zero()))?;
    let det_rec = e(sys.solve(&m0, 1e-3, 1, None))?;
    let cfg = SdeRunConfig::new(SdeScheme::HeunStratonovich, g, p, NoiseModel::standard_basis(), 1e-3, 1);
    let sde_rec = e(sde::simulate_path(&cfg, &m0))?;
    ensure(det_rec.states == sde_rec.states, "eps = 0 Heun path differs from the deterministic solver")?;
    Ok("bit-identical".into())
}

fn check_galerkin() -> CheckResult {
    let g = e(Grid1D::new(1.0, 33))?;
    let p = e(PhysicalParams::new(0.5, 0.3, 0.0, 0.1))?;
    let solver = e(GalerkinSolver::new(g, p, [0.1, 0.3, 0.0], 8))?;
    let rec = e(solver.solve(&tilted(&g, [-1.0, 0.0, 0.0], 0.3), 1e-4))?;
    let drift = rec.max_l2_drift();
    ensure(drift < 1e-8, format!("relative L2 drift {drift:e}"))?;
    Ok(format!("relative L2 drift {drift:.2e}"))
}

fn check_heun_order() -> CheckResult {
    let g = e(Grid1D::new(1.0, 9))?;
    let p = e(PhysicalParams::new(0.5, 0.5, 0.0, 0.25))?;
    let sys = e(SkeletonSystem::uncontrolled(
        g,
        p,
        NoiseModel::standard_basis(),
        AppliedFieldSchedule::constant([0.2, 0.5, 0.0], 0.25),
    ))?;
    let m0 = tilted(&g, [-1.0, 0.0, 0.2], 0.3);
    let fin = |dt: f64| -> std::result::Result<MagnetizationField, String> {
        Ok(e(sys.solve(&m0, dt, usize::MAX, None))?.states.pop().expect("nonempty"))
    };
    let base = 2.5e-3;
    let reference = fin(base / 16.0)?;
    let errs = [fin(base)?, fin(base / 2.0)?, fin(base / 4.0)?]
        .iter()
        .map(|s| s.sub(&reference).map(|d| d.max_norm()))
        .collect::<crate::Result<Vec<f64>>>()
        .map_err(|e| e.to_string())?;
    // Richardson-style correction for the finite reference.
    let order = ((errs[0] - errs[1]) / (errs[1] - errs[2])).log2();
    ensure((1.8..=2.2).contains(&order), format!("order {order}, errors {errs:?}"))?;
    Ok(format!("observed order {order:.3}"))
}

/// Single spin rotating about `e3` under Stratonovich noise.
pub fn rotation_model(scheme: SdeScheme, horizon: f64, dt: f64) -> crate::Result<SdeRunConfig> {
    let g = Grid1D::new(1.0, 3)?;
    let noise = NoiseModel::scalar_profile(MagnetizationField::uniform(3, E3), &g)?;
    let p = PhysicalParams::undamped(0.0, 1.0, horizon)?;
    Ok(SdeRunConfig::new(scheme, g, p, noise, dt, 0))
}

/// Initial spin of the rotation experiments: mostly along the rotation axis.
pub const ROTATION_M0: Vec3 = [0.28, 0.0, 0.96];

/// Mean terminal error of projected Heun on the rotation model against the
/// exact rotation, for each step count in `levels` (same Brownian paths).
pub fn strong_errors(n_paths: usize, levels: &[usize]) -> crate::Result<Vec<f64>> {
    let horizon = 1.0;
    let fine_steps = *levels.iter().max().ok_or_else(|| crate::error::invalid("no levels"))?;
    let m0 = MagnetizationField::uniform(3, ROTATION_M0);
    let mut errs = vec![0.0; levels.len()];
    for path in 0..n_paths {
        let fine = sde::BrownianDriver::new(sde::split_seed(77, path as u64), 1, horizon / fine_steps as f64, fine_steps)?
            .increments();
        let w: f64 = fine.iter().map(|d| d[0]).sum();
        let (c, s) = (w.cos(), w.sin());
        let exact = [ROTATION_M0[0] * c + ROTATION_M0[1] * s, -ROTATION_M0[0] * s + ROTATION_M0[1] * c, ROTATION_M0[2]];
        for (j, steps) in levels.iter().enumerate() {
            let inc = sde::coarsen_increments(&fine, fine_steps / steps)?;
            let cfg = rotation_model(SdeScheme::HeunStratonovich, horizon, horizon / *steps as f64)?;
            let rec = sde::simulate_path_with_increments(&cfg, &m0, &inc)?;
            let last = rec.states.last().expect("nonempty").values[0];
            errs[j] += vec3::norm(vec3::sub(last, exact)) / n_paths as f64;
        }
    }
    Ok(errs)
}

/// Least-squares slope of `log err` against `log dt`.
pub fn fitted_order(steps: &[usize], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = steps.iter().map(|n| -(*n as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Step counts of the strong-order study: dt from 1/128 down to 1/1024.
pub const STRONG_LEVELS: [usize; 4] = [128, 256, 512, 1024];

fn check_strong_order() -> CheckResult {
    let errs = e(strong_errors(256, &STRONG_LEVELS))?;
    let order = fitted_order(&STRONG_LEVELS, &errs);
    ensure(order >= 0.9, format!("fitted order {order:.3}, errors {errs:?}"))?;
    Ok(format!("fitted order {order:.3}"))
}

/// First and second terminal moments of each component.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentComparison {
    /// `(E m_c, E m_c²)` per component, difference over combined standard error.
    pub z_scores: Vec<f64>,
}

impl MomentComparison {
    pub fn max_abs_z(&self) -> f64 {
        self.z_scores.iter().fold(0.0, |a, z| a.max(z.abs()))
    }
}

fn moments(samples: &[Vec3]) -> Vec<(f64, f64)> {
    let n = samples.len() as f64;
    let mut out = Vec::new();
    for c in 0..3 {
        for pow in [1, 2] {
            let xs: Vec<f64> = samples.iter().map(|s| s[c].powi(pow)).collect();
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            out.push((mean, var / n));
        }
    }
    out
}

/// Terminal moments of Heun against the Ito-corrected Euler scheme on the
/// rotation model.
pub fn weak_equivalence(n_paths: usize, dt: f64, zero_ito_correction: bool) -> crate::Result<MomentComparison> {
    let m0 = MagnetizationField::uniform(3, ROTATION_M0);
    let heun = rotation_model(SdeScheme::HeunStratonovich, 1.0, dt)?;
    let mut euler = rotation_model(SdeScheme::EulerItoCorrected, 1.0, dt)?;
    euler.zero_ito_correction = zero_ito_correction;
    let a = sde::simulate_ensemble(&heun, &m0, n_paths, 1001, 0.1)?;
    let b = sde::simulate_ensemble(&euler, &m0, n_paths, 2002, 0.1)?;
    if a.n_failures() + b.n_failures() > 0 {
        return Err(crate::Error::MeasurementFailure("rotation paths failed".into()));
    }
    let ta: Vec<Vec3> = a.summaries.iter().map(|s| s.terminal).collect();
    let tb: Vec<Vec3> = b.summaries.iter().map(|s| s.terminal).collect();
    let z_scores = moments(&ta)
        .into_iter()
        .zip(moments(&tb))
        .map(|((ma, va), (mb, vb))| (ma - mb) / (va + vb).sqrt())
        .collect();
    Ok(MomentComparison { z_scores })
}

fn check_weak(zero_ito_correction: bool) -> CheckResult {
    let cmp = e(weak_equivalence(10_000, 1e-3, zero_ito_correction))?;
    let z = cmp.max_abs_z();
    ensure(z < 3.0, format!("max |z| = {z:.2} over moments {:?}", cmp.z_scores))?;
    Ok(format!("max |z| = {z:.2}"))
}

fn check_stability() -> CheckResult {
    let g = e(Grid1D::new(1.0, 33))?;
    let p = e(PhysicalParams::new(1.0, 1.0, 0.0, 6.0))?;
    let zeta = [-1.0, 0.0, 0.0];
    let target = 0.9 * det::stability_radius(&p, &g);
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if grid::h1_distance_to_uniform(&tilted(&g, zeta, mid), zeta, &g) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let m0 = tilted(&g, zeta, lo);
    let sys = e(SkeletonSystem::uncontrolled(g, p, NoiseModel::standard_basis(), AppliedFieldSchedule::zero()))?;
    let rec = e(sys.solve(&m0, 1e-4, 100, None))?;
    let d: Vec<f64> = rec.diagnostics.iter().map(|x| x.dist_h1_minus).collect();
    let grads: Vec<f64> = rec.states.iter().map(|s| grid::norms_unchecked(s, &g).grad_l2).collect();
    let tol = 1e-8 * 100.0;
    ensure(d.windows(2).all(|w| w[1] <= w[0] + tol), "distance increased")?;
    ensure(grads.windows(2).all(|w| w[1] <= w[0] + tol), "gradient norm increased")?;
    let ratio = d[d.len() - 1] / d[0];
    ensure(ratio < 0.01, format!("terminal/initial distance {ratio:e}"))?;
    ensure(rec.max_sphere_residual() <= 1e-10, "sphere residual")?;
    Ok(format!("d(0) = {:.5}, d(T)/d(0) = {ratio:.2e}", d[0]))
}

fn check_decay() -> CheckResult {
    let g = e(Grid1D::new(1.0, 21))?;
    let p = e(PhysicalParams::new(1.0, 0.1, 0.0, 1.0))?;
    let h_mag = 10.0;
    let dir = [-(0.35f64).cos(), (0.35f64).sin(), 0.0];
    let h = vec3::scale(h_mag, dir);
    let k = vec3::add(h, [0.0, p.beta * dir[1], p.beta * dir[2]]);
    let gamma = det::decay_rate_gamma(&p, h_mag);
    ensure(h_mag > det::field_threshold(&p), "field below threshold")?;
    let sys = e(SkeletonSystem::uncontrolled(g, p, NoiseModel::standard_basis(), AppliedFieldSchedule::constant(k, 1.0)))?;
    let reference = MagnetizationField::uniform(21, dir);
    let m0 = tilted(&g, [-1.0, 0.0, 0.0], 0.1);
    let rec = e(sys.solve(&m0, 2e-4, 50, Some(&reference)))?;
    let d: Vec<f64> = rec.diagnostics.iter().map(|x| x.dist_h1_ref.expect("reference set")).collect();
    for (t, di) in rec.times.iter().zip(&d) {
        let bound = d[0] * (-0.5 * gamma * t).exp() * (1.0 + 1e-3);
        ensure(*di <= bound, format!("d({t}) = {di:e} exceeds {bound:e}"))?;
    }
    Ok(format!("gamma = {gamma}, d(0) = {:.4}, d(T) = {:.2e}", d[0], d[d.len() - 1]))
}

fn check_reversal() -> CheckResult {
    let g = e(Grid1D::new(1.0, 17))?;
    let mut detail = Vec::new();
    for beta in [0.0, 0.1] {
        let p = e(PhysicalParams::new(1.0, beta, 0.0, 7.0))?;
        let plan = e(ldp::build_reversal_plan(0.1, 7.0, &p, &NoiseModel::standard_basis(), &g))?;
        let sys = e(SkeletonSystem::uncontrolled(g, p, NoiseModel::standard_basis(), plan.schedule.clone()))?;
        let rec = e(sys.solve(&MagnetizationField::uniform(17, [-1.0, 0.0, 0.0]), 1e-3, 1000, None))?;
        let d = rec.diagnostics.last().expect("nonempty").dist_h1_plus;
        let limit = 0.05 + plan.waypoints.eta;
        ensure(d < limit, format!("beta {beta}: terminal distance {d} >= {limit}"))?;
        detail.push(format!("beta {beta}: d(T) = {d:.2e}, cost = {:.3}", plan.cost));
    }
    Ok(detail.join("; "))
}
