use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use llg1d::cli::RunConfig;
use llg1d::grid::Grid1D;
use llg1d::ldp::{self, ReversalPlan};
use llg1d::model::{NoiseModel, PhysicalParams};

const BASE: &str = r#"
[grid]
length = 1.0
n_points = 17

[params]
alpha = 1.0
beta = 0.1
eps = 0.0
horizon = 7.0

[noise]
mode = "three_directions"
directions = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]

[initial]
kind = "uniform"
value = [-1.0, 0.0, 0.0]

[solver]
dt = 0.001
record_every = 500

[plan]
delta = 0.1
xi = [1.0]
eps = [1.0, 10.0]
"#;

fn llg1d(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_llg1d"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn negative_alpha_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", &BASE.replace("alpha = 1.0", "alpha = -1.0"));
    let out = llg1d(tmp.path(), &["run-det", "--config", "c.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params.alpha"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn run_sde_refuses_zero_noise() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", BASE);
    let out = llg1d(tmp.path(), &["run-sde", "--config", "c.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_det_rejects_noise() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", &BASE.replace("eps = 0.0", "eps = 0.1"));
    let out = llg1d(tmp.path(), &["run-det", "--config", "c.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", &BASE.replace("n_points = 17", "n_points = 17\nspacing = 0.1"));
    let out = llg1d(tmp.path(), &["run-det", "--config", "c.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = llg1d(tmp.path(), &["run-det", "--config", "absent.toml"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = RunConfig::from_toml_str(BASE).unwrap();
    cfg.validate().unwrap();
    let again = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
    assert_eq!(again, cfg);
}

#[test]
fn built_plan_reverses_the_needle() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write(dir, "plan.toml", BASE);
    let out = llg1d(dir, &["build-plan", "--config", "plan.toml", "--out", "plan"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // The file holds exactly the plan the library builds.
    let text = fs::read_to_string(dir.join("plan/plan.json")).unwrap();
    let plan: ReversalPlan = serde_json::from_str(&text).unwrap();
    let g = Grid1D::new(1.0, 17).unwrap();
    let p = PhysicalParams::new(1.0, 0.1, 0.0, 7.0).unwrap();
    let direct = ldp::build_reversal_plan(0.1, 7.0, &p, &NoiseModel::standard_basis(), &g).unwrap();
    assert_eq!(plan, direct);

    let bounds = json(&dir.join("plan/plan_bounds.json"));
    let rows = bounds.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let lb = rows[1]["lower_bound"].as_f64().unwrap();
    assert!((lb - (-(plan.cost + 1.0) / 10.0).exp()).abs() <= 1e-15);

    // Feed the schedule back in as the applied field.
    let with_field = format!("{BASE}\n[field]\nkind = \"plan\"\npath = \"plan/plan.json\"\n");
    write(dir, "run.toml", &with_field);
    let out = llg1d(dir, &["run-det", "--config", "run.toml", "--out", "det"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&dir.join("det/summary.json"));
    let d = summary["terminal"]["dist_h1_plus"].as_f64().unwrap();
    assert!(d < 0.05 + plan.waypoints.eta, "terminal distance {d}");
    assert!(summary["max_sphere_residual"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn trajectory_csv_has_the_documented_header() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = BASE.replace("horizon = 7.0", "horizon = 0.05").replace("eps = 0.0", "eps = 0.01");
    write(tmp.path(), "c.toml", &cfg);
    let out = llg1d(tmp.path(), &["run-sde", "--config", "c.toml", "--paths", "3", "--seed", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("out/trajectory.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("path_id,t,l2,h1,linf,energy,sphere_residual,dist_h1_plus,dist_h1_minus")
    );
    let ids: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert!(ids.contains(&"0") && ids.contains(&"2"));
    assert!(ids.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn quick_verify_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = llg1d(tmp.path(), &["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().filter(|l| l.starts_with("PASS ")).count() >= 9);
    assert!(!stdout.contains("FAIL "));
}

#[test]
fn weak_check_fails_without_the_ito_correction() {
    let tmp = tempfile::tempdir().unwrap();
    let out = llg1d(tmp.path(), &["verify", "--level", "full", "--zero-ito-correction"]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("FAIL scheme_weak_equivalence")));
}
