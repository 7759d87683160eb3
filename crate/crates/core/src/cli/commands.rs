//! Subcommand implementations.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::det::{self, Diagnostics, SkeletonSystem, TrajectoryRecord};
use crate::grid::{self, Grid1D, MagnetizationField};
use crate::ldp::{self, Event, EventEstimate};
use crate::sde::{self, SdeRunConfig, SdeScheme};
use crate::verify::{self, VerifyOptions};

use super::config::RunConfig;
use super::output::{self, ensure_dir};
use super::{CliError, CommonArgs, EventKind, Level};

fn load(common: &CommonArgs) -> Result<(RunConfig, PathBuf), CliError> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(r) = common.record_every {
        if r == 0 {
            return Err(CliError::Validation("--record-every must be at least 1".into()));
        }
        cfg.solver.record_every = r;
    }
    // `--out` is relative to the working directory, `output.dir` to the config file.
    let out = common.out.clone().unwrap_or_else(|| cfg.base_dir.join(&cfg.output.dir));
    Ok((cfg, out))
}

/// Whether `xs` never increases by more than `tol` between samples.
fn nonincreasing(xs: &[f64], tol: f64) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0] + tol)
}

fn max_drift_norm(sys: &SkeletonSystem, m: &MagnetizationField, t: f64) -> Result<f64, CliError> {
    Ok(sys.rhs(m, t)?.max_norm())
}

#[derive(Debug, Serialize)]
struct Monotonicity {
    dist_h1_plus: bool,
    dist_h1_minus: bool,
    grad_l2: bool,
    dist_h1_reference: Option<bool>,
}

#[derive(Debug, Serialize)]
struct DetSummary {
    command: &'static str,
    horizon: f64,
    dt: f64,
    n_records: usize,
    initial: Diagnostics,
    terminal: Diagnostics,
    max_sphere_residual: f64,
    drift_norm_initial: f64,
    drift_norm_terminal: f64,
    stability_radius: f64,
    nonincreasing: Monotonicity,
    fitted_decay_rate: Option<f64>,
}

pub fn run_det(common: &CommonArgs) -> Result<(), CliError> {
    let (cfg, out) = load(common)?;
    let p = cfg.params()?;
    if p.eps != 0.0 {
        return Err(CliError::Validation(format!(
            "params.eps: run-det needs eps = 0 (got {}); use run-sde for noisy runs",
            p.eps
        )));
    }
    let g = cfg.grid()?;
    let sys = SkeletonSystem::new(g, p, cfg.noise(&g)?, cfg.schedule(&p)?, cfg.control_path(&p)?)?;
    let m0 = cfg.initial(&g)?;
    let reference = cfg
        .output
        .reference
        .map(|v| MagnetizationField::uniform(g.n_points(), v));
    let rec = sys.solve(&m0, cfg.solver.dt, cfg.solver.record_every, reference.as_ref())?;
    ensure_dir(&out)?;
    output::write_trajectories(&out.join("trajectory.csv"), &[(0, &rec)])?;
    if cfg.output.dump_states {
        output::write_states(&out.join("states.csv"), &[(0, &rec)])?;
    }
    let tol = 1e-8 * cfg.solver.record_every as f64;
    let col = |f: fn(&Diagnostics) -> f64| rec.diagnostics.iter().map(f).collect::<Vec<_>>();
    let grads: Vec<f64> = rec
        .states
        .iter()
        .map(|s| grid::norms_unchecked(s, &g).grad_l2)
        .collect();
    let ref_dists: Option<Vec<f64>> = rec
        .diagnostics
        .iter()
        .map(|d| d.dist_h1_ref)
        .collect();
    let fitted_decay_rate = reference
        .as_ref()
        .and_then(|r| det::measure_decay(&rec, r).ok());
    let last_t = *rec.times.last().expect("record is nonempty");
    let summary = DetSummary {
        command: "run-det",
        horizon: p.horizon,
        dt: cfg.solver.dt,
        n_records: rec.len(),
        initial: rec.diagnostics[0],
        terminal: *rec.diagnostics.last().expect("record is nonempty"),
        max_sphere_residual: rec.max_sphere_residual(),
        drift_norm_initial: max_drift_norm(&sys, &m0, 0.0)?,
        drift_norm_terminal: max_drift_norm(&sys, rec.last_state().expect("nonempty"), last_t)?,
        stability_radius: det::stability_radius(&p, &g),
        nonincreasing: Monotonicity {
            dist_h1_plus: nonincreasing(&col(|d| d.dist_h1_plus), tol),
            dist_h1_minus: nonincreasing(&col(|d| d.dist_h1_minus), tol),
            grad_l2: nonincreasing(&grads, tol),
            dist_h1_reference: ref_dists.map(|d| nonincreasing(&d, tol)),
        },
        fitted_decay_rate,
    };
    output::write_json(&out.join("summary.json"), &summary)?;
    println!(
        "run-det: T = {}, terminal dist_h1_plus = {:.6e}, dist_h1_minus = {:.6e}, output in {}",
        p.horizon,
        summary.terminal.dist_h1_plus,
        summary.terminal.dist_h1_minus,
        out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct SdePathSummary {
    path_id: usize,
    seed: u64,
    terminal: Option<Diagnostics>,
    max_sphere_residual: Option<f64>,
    failure: Option<String>,
}

#[derive(Debug, Serialize)]
struct SdeSummary {
    command: &'static str,
    scheme: SdeScheme,
    base_seed: u64,
    n_paths: usize,
    n_failures: usize,
    eps: f64,
    dt: f64,
    horizon: f64,
    zero_ito_correction: bool,
    paths: Vec<SdePathSummary>,
}

fn sde_config(cfg: &RunConfig, g: Grid1D, seed: u64) -> Result<SdeRunConfig, CliError> {
    let p = cfg.params()?;
    let mut c = SdeRunConfig::new(cfg.solver.scheme, g, p, cfg.noise(&g)?, cfg.solver.dt, seed);
    c.control = cfg.control_path(&p)?;
    c.applied_field = cfg.schedule(&p)?;
    c.record_every = cfg.solver.record_every;
    c.validate()?;
    Ok(c)
}

fn pool() -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(sde::configured_threads())
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot build worker pool: {e}")))
}

pub fn run_sde(
    common: &CommonArgs,
    seed: Option<u64>,
    paths: Option<usize>,
    zero_ito_correction: bool,
) -> Result<(), CliError> {
    let (cfg, out) = load(common)?;
    let p = cfg.params()?;
    if p.eps == 0.0 {
        return Err(CliError::Validation(
            "params.eps: eps = 0 is a deterministic run; use run-det".into(),
        ));
    }
    let n_paths = paths.unwrap_or(cfg.solver.n_paths);
    if n_paths == 0 {
        return Err(CliError::Validation("--paths must be at least 1".into()));
    }
    let base_seed = seed.unwrap_or(cfg.solver.seed);
    let g = cfg.grid()?;
    let mut base = sde_config(&cfg, g, base_seed)?;
    base.zero_ito_correction = zero_ito_correction;
    let m0 = cfg.initial(&g)?;
    let results: Vec<(u64, Result<TrajectoryRecord, crate::Error>)> = pool()?.install(|| {
        (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let s = sde::split_seed(base_seed, i as u64);
                let mut c = base.clone();
                c.seed = s;
                (s, sde::simulate_path(&c, &m0))
            })
            .collect()
    });
    let ok: Vec<(usize, &TrajectoryRecord)> = results
        .iter()
        .enumerate()
        .filter_map(|(i, (_, r))| r.as_ref().ok().map(|r| (i, r)))
        .collect();
    ensure_dir(&out)?;
    output::write_trajectories(&out.join("trajectory.csv"), &ok)?;
    if cfg.output.dump_states {
        output::write_states(&out.join("states.csv"), &ok)?;
    }
    let path_summaries: Vec<SdePathSummary> = results
        .iter()
        .enumerate()
        .map(|(i, (s, r))| match r {
            Ok(rec) => SdePathSummary {
                path_id: i,
                seed: *s,
                terminal: rec.diagnostics.last().copied(),
                max_sphere_residual: Some(rec.max_sphere_residual()),
                failure: None,
            },
            Err(e) => SdePathSummary {
                path_id: i,
                seed: *s,
                terminal: None,
                max_sphere_residual: None,
                failure: Some(e.to_string()),
            },
        })
        .collect();
    let n_failures = path_summaries.iter().filter(|s| s.failure.is_some()).count();
    let summary = SdeSummary {
        command: "run-sde",
        scheme: base.scheme,
        base_seed,
        n_paths,
        n_failures,
        eps: p.eps,
        dt: base.dt,
        horizon: p.horizon,
        zero_ito_correction,
        paths: path_summaries,
    };
    output::write_json(&out.join("summary.json"), &summary)?;
    println!(
        "run-sde: {n_paths} path(s), scheme {:?}, base seed {base_seed}, {n_failures} failure(s), output in {}",
        base.scheme,
        out.display()
    );
    if n_failures > 0 {
        let first = summary
            .paths
            .iter()
            .find_map(|s| s.failure.clone())
            .unwrap_or_default();
        return Err(CliError::Runtime(format!("{n_failures} path(s) failed; first: {first}")));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct LowerBoundRow {
    xi: f64,
    eps: f64,
    lower_bound: f64,
}

pub fn build_plan(common: &CommonArgs, delta: Option<f64>, horizon: Option<f64>) -> Result<(), CliError> {
    let (cfg, out) = load(common)?;
    let p = cfg.params()?;
    let g = cfg.grid()?;
    let noise = cfg.noise(&g)?;
    let delta = delta
        .or(cfg.plan.as_ref().map(|pl| pl.delta))
        .ok_or_else(|| CliError::Validation("plan.delta: missing (set it or pass --delta)".into()))?;
    let horizon = horizon
        .or(cfg.plan.as_ref().and_then(|pl| pl.horizon))
        .unwrap_or(p.horizon);
    let plan = ldp::build_reversal_plan(delta, horizon, &p, &noise, &g)?;
    ensure_dir(&out)?;
    let path = out.join("plan.json");
    output::write_json(&path, &plan)?;
    println!(
        "build-plan: N = {}, eta = {:.6e}, R = {:.6}, cost = {:.6}, written to {}",
        plan.waypoints.n_segments(),
        plan.waypoints.eta,
        plan.field_magnitude,
        plan.cost,
        path.display()
    );
    let mut rows = Vec::new();
    if let Some(pl) = &cfg.plan {
        for &xi in &pl.xi {
            for &eps in &pl.eps {
                let lower_bound = ldp::lower_bound_probability(plan.cost, xi, eps)?;
                println!("  lower bound (xi = {xi}, eps = {eps}): {lower_bound:.6e}");
                rows.push(LowerBoundRow { xi, eps, lower_bound });
            }
        }
    }
    if !rows.is_empty() {
        output::write_json(&out.join("plan_bounds.json"), &rows)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct EstimateSummary {
    command: &'static str,
    eps: f64,
    base_seed: u64,
    scheme: SdeScheme,
    estimate: EventEstimate,
    xi: f64,
    cost: f64,
    lower_bound: Option<f64>,
    upper_bound: Option<f64>,
    notes: Vec<String>,
}

pub fn estimate(
    common: &CommonArgs,
    seed: Option<u64>,
    paths: Option<usize>,
    event: Option<(EventKind, f64)>,
    eps: Option<f64>,
    xi: Option<f64>,
) -> Result<(), CliError> {
    let (mut cfg, out) = load(common)?;
    if let Some(e) = eps {
        cfg.params.eps = e;
    }
    let p = cfg.params()?;
    let g = cfg.grid()?;
    let spec = cfg.estimate.clone();
    let event = match event {
        Some((EventKind::Reversal, delta)) => Event::Reversal { delta },
        Some((EventKind::Exit, rho)) => Event::Exit { rho },
        None => spec
            .as_ref()
            .map(|s| s.event)
            .ok_or_else(|| CliError::Validation("estimate.event: missing (set it or pass --event)".into()))?,
    };
    event.validate()?;
    let n_paths = paths.unwrap_or(cfg.solver.n_paths);
    if n_paths < 100 {
        return Err(CliError::Validation(format!(
            "solver.n_paths: estimates need at least 100 paths, got {n_paths}"
        )));
    }
    let base_seed = seed.unwrap_or(cfg.solver.seed);
    let sde_cfg = sde_config(&cfg, g, base_seed)?;
    let m0 = cfg.initial(&g)?;
    let est = ldp::estimate_event_probability(&sde_cfg, &m0, event, n_paths, base_seed)?;
    let xi = xi.or(spec.as_ref().map(|s| s.xi)).unwrap_or(0.0);
    let cost = match spec.as_ref().and_then(|s| s.cost) {
        Some(c) => c,
        None => cfg.forcing_cost(&p)?,
    };
    let mut notes = Vec::new();
    let lower_bound = if p.eps > 0.0 && xi > 0.0 {
        Some(ldp::lower_bound_probability(cost, xi, p.eps)?)
    } else {
        notes.push("lower bound needs eps > 0 and xi > 0".into());
        None
    };
    let upper_bound = match (event, spec.as_ref().and_then(|s| s.inner_radius)) {
        (Event::Exit { rho }, Some(r)) if p.eps > 0.0 => {
            let noise = cfg.noise(&g)?;
            match ldp::upper_bound_probability(r, rho, xi, p.eps, &p, &noise, &g) {
                Ok(b) => Some(b),
                Err(e) => {
                    notes.push(format!("upper bound unavailable: {e}"));
                    None
                }
            }
        }
        (Event::Exit { .. }, _) => {
            notes.push("upper bound needs estimate.inner_radius and eps > 0".into());
            None
        }
        (Event::Reversal { .. }, _) => None,
    };
    if est.degraded {
        notes.push(format!(
            "estimate degraded: {} of {} paths failed",
            est.n_failures, est.n_paths
        ));
    }
    println!(
        "estimate: p_hat = {:.6e}, wilson 95% = [{:.6e}, {:.6e}], lower bound = {}, upper bound = {}, failures = {}",
        est.p_hat,
        est.wilson_95.0,
        est.wilson_95.1,
        lower_bound.map_or("n/a".into(), |b| format!("{b:.6e}")),
        upper_bound.map_or("n/a".into(), |b| format!("{b:.6e}")),
        est.n_failures
    );
    for n in &notes {
        println!("  note: {n}");
    }
    let summary = EstimateSummary {
        command: "estimate",
        eps: p.eps,
        base_seed,
        scheme: sde_cfg.scheme,
        estimate: est,
        xi,
        cost,
        lower_bound,
        upper_bound,
        notes,
    };
    ensure_dir(&out)?;
    output::write_json(&out.join("estimate.json"), &summary)?;
    Ok(())
}

pub fn verify(level: Level, zero_ito_correction: bool) -> Result<(), CliError> {
    let opts = VerifyOptions {
        full: level == Level::Full,
        zero_ito_correction,
    };
    let outcomes = verify::run_suite(&opts);
    let mut failed = 0;
    for o in &outcomes {
        println!("{o}");
        if !o.passed {
            failed += 1;
        }
    }
    println!(
        "verify ({}): {} passed, {failed} failed",
        if opts.full { "full" } else { "quick" },
        outcomes.len() - failed
    );
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} verification check(s) failed")));
    }
    Ok(())
}
