//! Scenario files: TOML documents describing parameters, initial states,
//! integrator settings and an optional parameter sweep.
//!
//! ```toml
//! schema = 1
//! seed = 42
//!
//! [params]
//! b0 = 0.4
//! # ... all eleven rates ...
//!
//! [[initial_states]]
//! S = 60.0
//! I = 25.0
//! R = 15.0
//!
//! [integrator]
//! method = "dopri45"
//! t_max = 5000.0
//!
//! [sweep]
//! parameter = "beta2"
//! from = 0.0
//! to = 0.2
//! steps = 11
//! compensate = "beta1"
//! ```
//!
//! Unknown keys are rejected everywhere.

use serde::Deserialize;
use thiserror::Error;

use crate::model::{AbsState, ParamName, Params, PropState, Rates};
use crate::simulate::{IntegratorConfig, Method};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_RANDOM_STARTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("{}", describe(.field, .line, .message))]
    Schema {
        field: Option<String>,
        line: Option<usize>,
        message: String,
    },
    #[error("invalid parameters: {0}")]
    Params(#[from] crate::model::ModelError),
    #[error("invalid initial state #{index}: {message}")]
    InitialState { index: usize, message: String },
    #[error("invalid integrator settings: {0}")]
    Integrator(String),
    #[error("invalid sweep: {0}")]
    Sweep(String),
}

fn describe(field: &Option<String>, line: &Option<usize>, message: &str) -> String {
    let mut out = String::from("schema error");
    if let Some(l) = line {
        out.push_str(&format!(" at line {l}"));
    }
    if let Some(f) = field {
        out.push_str(&format!(" (field `{f}`)"));
    }
    out.push_str(": ");
    out.push_str(message.trim());
    out
}

impl ScenarioError {
    pub fn field(&self) -> Option<&str> {
        match self {
            ScenarioError::Schema { field, .. } => field.as_deref(),
            _ => None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema: u32,
    seed: Option<u64>,
    random_starts: Option<usize>,
    params: Rates,
    #[serde(default)]
    initial_states: Vec<RawInitialState>,
    integrator: Option<RawIntegrator>,
    sweep: Option<Sweep>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawInitialState {
    Absolute(RawAbsolute),
    Proportions(RawProportions),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawAbsolute {
    S: f64,
    I: f64,
    R: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProportions {
    s: f64,
    i: f64,
    r: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
enum MethodName {
    Rk4,
    #[default]
    Dopri45,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    #[serde(default)]
    method: MethodName,
    step: Option<f64>,
    abs_tol: Option<f64>,
    rel_tol: Option<f64>,
    t_max: Option<f64>,
    sample_interval: Option<f64>,
    max_step: Option<f64>,
    convergence_eps: Option<f64>,
    convergence_window: Option<usize>,
    tail_samples: Option<usize>,
    stop_on_convergence: Option<bool>,
    max_steps: Option<usize>,
}

impl RawIntegrator {
    fn build(self) -> Result<IntegratorConfig, ScenarioError> {
        let d = IntegratorConfig::default();
        let method = match self.method {
            MethodName::Rk4 => {
                if self.abs_tol.is_some() || self.rel_tol.is_some() {
                    return Err(ScenarioError::Integrator(
                        "rk4 takes `step`, not tolerances".into(),
                    ));
                }
                Method::Rk4 {
                    step: self.step.unwrap_or(0.01),
                }
            }
            MethodName::Dopri45 => {
                if self.step.is_some() {
                    return Err(ScenarioError::Integrator(
                        "dopri45 takes tolerances, not `step`".into(),
                    ));
                }
                let (da, dr) = match d.method {
                    Method::Dopri45 { abs_tol, rel_tol } => (abs_tol, rel_tol),
                    Method::Rk4 { .. } => unreachable!("default method is adaptive"),
                };
                Method::Dopri45 {
                    abs_tol: self.abs_tol.unwrap_or(da),
                    rel_tol: self.rel_tol.unwrap_or(dr),
                }
            }
        };
        let cfg = IntegratorConfig {
            method,
            t_max: self.t_max.unwrap_or(d.t_max),
            sample_interval: self.sample_interval.unwrap_or(d.sample_interval),
            max_step: self.max_step.unwrap_or(d.max_step),
            convergence_eps: self.convergence_eps.unwrap_or(d.convergence_eps),
            convergence_window: self.convergence_window.unwrap_or(d.convergence_window),
            tail_samples: self.tail_samples.unwrap_or(d.tail_samples),
            stop_on_convergence: self.stop_on_convergence.unwrap_or(d.stop_on_convergence),
            max_steps: self.max_steps.unwrap_or(d.max_steps),
        };
        cfg.validate()
            .map_err(|e| ScenarioError::Integrator(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: ParamName,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    /// Parameter adjusted to keep `parameter + compensate` at its scenario
    /// value, e.g. `beta1` when sweeping `beta2` at fixed `beta`.
    pub compensate: Option<ParamName>,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| {
                if k + 1 == self.steps {
                    self.to
                } else {
                    self.from + (self.to - self.from) * k as f64 / last
                }
            })
            .collect()
    }

    /// Parameters at one sweep value.
    pub fn apply(&self, base: &Params, value: f64) -> Result<Params, crate::model::ModelError> {
        let mut rates = base.rates();
        if let Some(other) = self.compensate {
            let total = base.get(self.parameter) + base.get(other);
            rates.set(other, total - value);
        }
        rates.set(self.parameter, value);
        rates.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    Absolute(AbsState),
    Proportions(PropState),
}

impl InitialState {
    pub fn proportions(&self) -> PropState {
        match self {
            InitialState::Absolute(x) => x.proportions(),
            InitialState::Proportions(x) => *x,
        }
    }

    /// Absolute class sizes; proportions are taken with `N = 1`.
    pub fn absolute(&self) -> AbsState {
        match self {
            InitialState::Absolute(x) => *x,
            InitialState::Proportions(x) => AbsState {
                susceptible: x.s(),
                infective: x.i(),
                removed: x.r(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: Params,
    pub seed: u64,
    pub random_starts: usize,
    pub initial_states: Vec<InitialState>,
    pub integrator: IntegratorConfig,
    pub sweep: Option<Sweep>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text.as_bytes()[..offset.min(text.len())]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
        + 1
}

fn quoted_after<'a>(message: &'a str, prefix: &str) -> Option<&'a str> {
    let start = message.find(prefix)? + prefix.len();
    let rest = &message[start..];
    Some(&rest[..rest.find('`')?])
}

fn schema_error(text: &str, err: toml::de::Error) -> ScenarioError {
    let message = err.message().to_string();
    let field = quoted_after(&message, "missing field `")
        .or_else(|| quoted_after(&message, "unknown field `"))
        .map(str::to_string);
    let line = err.span().map(|s| line_of(text, s.start));
    ScenarioError::Schema {
        field,
        line,
        message,
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| schema_error(text, e))?;
        if raw.schema != SCHEMA_VERSION {
            return Err(ScenarioError::Schema {
                field: Some("schema".into()),
                line: None,
                message: format!(
                    "unsupported schema version {} (expected {SCHEMA_VERSION})",
                    raw.schema
                ),
            });
        }
        let params = raw.params.validate()?;
        let initial_states = raw
            .initial_states
            .into_iter()
            .enumerate()
            .map(|(index, s)| {
                let fail = |e: crate::model::ModelError| ScenarioError::InitialState {
                    index,
                    message: e.to_string(),
                };
                match s {
                    RawInitialState::Absolute(a) => AbsState::new(a.S, a.I, a.R)
                        .map(InitialState::Absolute)
                        .map_err(fail),
                    RawInitialState::Proportions(x) => PropState::new(x.s, x.i, x.r)
                        .map(InitialState::Proportions)
                        .map_err(fail),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let integrator = match raw.integrator {
            Some(i) => i.build()?,
            None => IntegratorConfig::default(),
        };
        if let Some(sw) = &raw.sweep {
            if sw.steps < 2 {
                return Err(ScenarioError::Sweep("steps must be at least 2".into()));
            }
            if sw.steps > 1_000_000 {
                return Err(ScenarioError::Sweep("too many steps".into()));
            }
            if !sw.from.is_finite() || !sw.to.is_finite() {
                return Err(ScenarioError::Sweep("bounds must be finite".into()));
            }
            if sw.compensate == Some(sw.parameter) {
                return Err(ScenarioError::Sweep(
                    "compensate must differ from parameter".into(),
                ));
            }
        }
        Ok(Scenario {
            params,
            seed: raw.seed.unwrap_or(DEFAULT_SEED),
            random_starts: raw.random_starts.unwrap_or(DEFAULT_RANDOM_STARTS),
            initial_states,
            integrator,
            sweep: raw.sweep,
        })
    }
}
