//! TOML run configuration.
//!
//! Every table rejects unknown keys. `RunConfig::load` parses and validates;
//! the `build_*` methods turn the validated config into solver inputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::det::ControlPath;
use crate::grid::{Grid1D, MagnetizationField};
use crate::ldp::{Event, ReversalPlan};
use crate::model::{AppliedFieldSchedule, NoiseModel, PhysicalParams};
use crate::sde::SdeScheme;
use crate::vec3::{self, Vec3};

use super::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub length: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub eps: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    ThreeDirections { directions: [Vec3; 3] },
    /// One channel with the same direction at every node.
    ScalarUniform { value: Vec3 },
    /// One channel with one vector per node.
    ScalarProfile { profile: Vec<Vec3> },
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::ThreeDirections {
            directions: [vec3::E1, vec3::E2, vec3::E3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Uniform {
        value: Vec3,
    },
    /// `normalize(base + amplitude · cos(mode·π·x/l) · tilt)`.
    CosineTilt {
        base: Vec3,
        tilt: Vec3,
        amplitude: f64,
        #[serde(default = "one")]
        mode: usize,
    },
}

fn one() -> usize {
    1
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self::Uniform {
            value: [-1.0, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    #[default]
    None,
    Constant {
        value: Vec3,
    },
    Piecewise {
        breakpoints: Vec<f64>,
        values: Vec<Vec3>,
    },
    /// The applied-field schedule of a plan file written by `build-plan`.
    Plan {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlSpec {
    #[default]
    None,
    Constant {
        value: Vec<f64>,
    },
    Piecewise {
        breakpoints: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
    /// The control of a plan file written by `build-plan`.
    Plan {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_scheme")]
    pub scheme: SdeScheme,
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default = "one")]
    pub n_paths: usize,
}

fn default_scheme() -> SdeScheme {
    SdeScheme::HeunStratonovich
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    /// Also write every node of every recorded state.
    #[serde(default)]
    pub dump_states: bool,
    /// Uniform state used for distance monotonicity and the decay fit.
    #[serde(default)]
    pub reference: Option<Vec3>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_out(),
            dump_states: false,
            reference: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSpec {
    pub event: Event,
    /// Slack ξ in the exponential bounds.
    pub xi: f64,
    /// Rate-function cost for the lower bound; defaults to the control cost,
    /// or the plan cost when the field comes from a plan.
    #[serde(default)]
    pub cost: Option<f64>,
    /// Inner radius `r < ρ` for the exit upper bound.
    #[serde(default)]
    pub inner_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSpec {
    pub delta: f64,
    #[serde(default)]
    pub horizon: Option<f64>,
    /// `(ξ, ε)` grid on which the lower bound is printed.
    #[serde(default)]
    pub xi: Vec<f64>,
    #[serde(default)]
    pub eps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub params: ParamsSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub field: FieldSpec,
    #[serde(default)]
    pub control: ControlSpec,
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub estimate: Option<EstimateSpec>,
    #[serde(default)]
    pub plan: Option<PlanSpec>,
    /// Directory that relative plan paths are resolved against; not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn validation(field: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{field}: {e}"))
}

fn finite_vec(field: &str, v: &[f64]) -> Result<(), CliError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(validation(field, "non-finite value"))
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, CliError> {
        toml::from_str(s).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn to_toml_string(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Runtime(format!("cannot serialize config: {e}")))
    }

    /// Reads, parses and validates a config file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every numeric field before any computation starts.
    pub fn validate(&self) -> Result<(), CliError> {
        let g = self.grid()?;
        let p = self.params()?;
        let noise = self.noise(&g)?;
        self.initial(&g)?;
        let s = &self.solver;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(validation("solver.dt", format!("must be positive, got {}", s.dt)));
        }
        crate::det::step_count(p.horizon, s.dt).map_err(|e| validation("solver.dt", e))?;
        if s.record_every == 0 {
            return Err(validation("solver.record_every", "must be at least 1"));
        }
        if s.n_paths == 0 {
            return Err(validation("solver.n_paths", "must be at least 1"));
        }
        self.schedule(&p)?;
        let control = self.control_path(&p)?;
        if let Some(c) = control.n_channels() {
            if c != noise.n_channels() {
                return Err(validation(
                    "control",
                    format!(
                        "has {c} channels but the noise model has {}",
                        noise.n_channels()
                    ),
                ));
            }
        }
        if let Some(e) = &self.estimate {
            e.event.validate().map_err(|x| validation("estimate.event", x))?;
            if !(e.xi >= 0.0 && e.xi.is_finite()) {
                return Err(validation("estimate.xi", "must be nonnegative"));
            }
            if let Some(c) = e.cost {
                if !(c >= 0.0 && c.is_finite()) {
                    return Err(validation("estimate.cost", "must be nonnegative"));
                }
            }
            if let Some(r) = e.inner_radius {
                if !(r > 0.0 && r.is_finite()) {
                    return Err(validation("estimate.inner_radius", "must be positive"));
                }
            }
        }
        if let Some(pl) = &self.plan {
            if !(pl.delta > 0.0 && pl.delta.is_finite()) {
                return Err(validation("plan.delta", "must be positive"));
            }
            if let Some(h) = pl.horizon {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(validation("plan.horizon", "must be positive"));
                }
            }
            finite_vec("plan.xi", &pl.xi)?;
            if pl.eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                return Err(validation("plan.eps", "values must be positive"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid1D, CliError> {
        Grid1D::new(self.grid.length, self.grid.n_points).map_err(|e| validation("grid", e))
    }

    pub fn params(&self) -> Result<PhysicalParams, CliError> {
        let s = &self.params;
        for (name, v) in [
            ("params.alpha", s.alpha),
            ("params.beta", s.beta),
            ("params.eps", s.eps),
            ("params.horizon", s.horizon),
        ] {
            if !v.is_finite() {
                return Err(validation(name, "non-finite value"));
            }
        }
        if s.alpha <= 0.0 {
            return Err(validation("params.alpha", format!("must be positive, got {}", s.alpha)));
        }
        if s.beta < 0.0 {
            return Err(validation("params.beta", format!("must be nonnegative, got {}", s.beta)));
        }
        if !(0.0..=1.0).contains(&s.eps) {
            return Err(validation("params.eps", format!("must lie in [0, 1], got {}", s.eps)));
        }
        if s.horizon <= 0.0 {
            return Err(validation("params.horizon", format!("must be positive, got {}", s.horizon)));
        }
        PhysicalParams::new(s.alpha, s.beta, s.eps, s.horizon).map_err(|e| validation("params", e))
    }

    pub fn noise(&self, g: &Grid1D) -> Result<NoiseModel, CliError> {
        let model = match &self.noise {
            NoiseSpec::ThreeDirections { directions } => NoiseModel::ThreeDirections {
                directions: *directions,
            },
            NoiseSpec::ScalarUniform { value } => NoiseModel::ScalarProfile {
                profile: MagnetizationField::uniform(g.n_points(), *value),
            },
            NoiseSpec::ScalarProfile { profile } => NoiseModel::ScalarProfile {
                profile: MagnetizationField::new(profile.clone()),
            },
        };
        model.validate(Some(g)).map_err(|e| validation("noise", e))?;
        Ok(model)
    }

    pub fn initial(&self, g: &Grid1D) -> Result<MagnetizationField, CliError> {
        let m = match &self.initial {
            InitialSpec::Uniform { value } => {
                let v = vec3::normalize(*value)
                    .ok_or_else(|| validation("initial.value", "must be nonzero"))?;
                if (vec3::norm(*value) - 1.0).abs() > 1e-10 {
                    return Err(validation("initial.value", "must be a unit vector"));
                }
                MagnetizationField::uniform(g.n_points(), v)
            }
            InitialSpec::CosineTilt {
                base,
                tilt,
                amplitude,
                mode,
            } => {
                finite_vec("initial", &[base.as_slice(), tilt.as_slice()].concat())?;
                if !amplitude.is_finite() {
                    return Err(validation("initial.amplitude", "non-finite value"));
                }
                let l = g.length();
                let f = |x: f64| {
                    let c = amplitude * (*mode as f64 * std::f64::consts::PI * x / l).cos();
                    vec3::normalize(vec3::axpy(*base, c, *tilt))
                };
                if g.nodes().any(|x| f(x).is_none()) {
                    return Err(validation("initial", "tilted state vanishes at a node"));
                }
                MagnetizationField::from_fn(g, |x| f(x).expect("checked above"))
            }
        };
        Ok(m)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn load_plan(&self, path: &Path) -> Result<ReversalPlan, CliError> {
        let full = self.resolve(path);
        let text = std::fs::read_to_string(&full)
            .map_err(|e| CliError::Validation(format!("cannot read plan {}: {e}", full.display())))?;
        let plan: ReversalPlan = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("plan {}: {e}", full.display())))?;
        plan.schedule.validate().map_err(|e| validation("plan.schedule", e))?;
        plan.control.validate().map_err(|e| validation("plan.control", e))?;
        Ok(plan)
    }

    pub fn schedule(&self, p: &PhysicalParams) -> Result<AppliedFieldSchedule, CliError> {
        let s = match &self.field {
            FieldSpec::None => AppliedFieldSchedule::zero(),
            FieldSpec::Constant { value } => {
                finite_vec("field.value", value)?;
                AppliedFieldSchedule::constant(*value, p.horizon)
            }
            FieldSpec::Piecewise {
                breakpoints,
                values,
            } => AppliedFieldSchedule::new(breakpoints.clone(), values.clone())
                .map_err(|e| validation("field", e))?,
            FieldSpec::Plan { path } => self.load_plan(path)?.schedule,
        };
        Ok(s)
    }

    pub fn control_path(&self, p: &PhysicalParams) -> Result<ControlPath, CliError> {
        let c = match &self.control {
            ControlSpec::None => ControlPath::zero(),
            ControlSpec::Constant { value } => {
                finite_vec("control.value", value)?;
                ControlPath::constant(value.clone(), p.horizon)
            }
            ControlSpec::Piecewise {
                breakpoints,
                values,
            } => ControlPath::new(breakpoints.clone(), values.clone())
                .map_err(|e| validation("control", e))?,
            ControlSpec::Plan { path } => self.load_plan(path)?.control,
        };
        Ok(c)
    }

    /// Cost of the forcing for lower bounds: the control cost, plus the plan
    /// cost when the applied field is a plan's schedule.
    pub fn forcing_cost(&self, p: &PhysicalParams) -> Result<f64, CliError> {
        let mut cost = self.control_path(p)?.cost();
        if let FieldSpec::Plan { path } = &self.field {
            cost += self.load_plan(path)?.cost;
        }
        Ok(cost)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[grid]
length = 1.0
n_points = 17

[params]
alpha = 1.0
beta = 0.1
eps = 0.01
horizon = 0.5

[noise]
mode = "three_directions"
directions = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]

[initial]
kind = "cosine_tilt"
base = [-1.0, 0.0, 0.0]
tilt = [0.0, 1.0, 0.0]
amplitude = 0.05

[field]
kind = "constant"
value = [0.0, 0.0, 0.3]

[control]
kind = "piecewise"
breakpoints = [0.0, 0.25, 0.5]
values = [[0.1, 0.0, 0.0], [0.0, 0.2, 0.0]]

[solver]
scheme = "euler_ito_corrected"
dt = 0.001
seed = 42
record_every = 10
n_paths = 3

[output]
dir = "results"

[estimate]
event = { kind = "exit", rho = 0.04 }
xi = 0.0
inner_radius = 0.039
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = RunConfig::from_toml_str(SAMPLE).unwrap();
        cfg.validate().unwrap();
        let again = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(cfg.solver.scheme, SdeScheme::EulerItoCorrected);
        let g = cfg.grid().unwrap();
        assert!(cfg.initial(&g).unwrap().is_saturated(1e-12));
        assert!((cfg.forcing_cost(&cfg.params().unwrap()).unwrap() - 0.5 * (0.25 * 0.01 + 0.25 * 0.04)).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = SAMPLE.replace("n_points = 17", "n_points = 17\nnpoints = 3");
        let e = RunConfig::from_toml_str(&bad).unwrap_err();
        assert!(e.to_string().contains("npoints"), "{e}");
    }

    #[test]
    fn invalid_values_name_the_field() {
        let bad = SAMPLE.replace("alpha = 1.0", "alpha = -1.0");
        let e = RunConfig::from_toml_str(&bad).unwrap().validate().unwrap_err();
        assert!(e.to_string().contains("params.alpha"), "{e}");
        assert_eq!(e.exit_code(), 2);

        let bad = SAMPLE.replace("dt = 0.001", "dt = 0.3");
        let e = RunConfig::from_toml_str(&bad).unwrap().validate().unwrap_err();
        assert!(e.to_string().contains("solver.dt"), "{e}");

        let bad = SAMPLE.replace("[[0.1, 0.0, 0.0], [0.0, 0.2, 0.0]]", "[[0.1], [0.2]]");
        let e = RunConfig::from_toml_str(&bad).unwrap().validate().unwrap_err();
        assert!(e.to_string().contains("control"), "{e}");
    }
}
