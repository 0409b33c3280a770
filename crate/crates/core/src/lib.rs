//! Analysis of an SIRS epidemic model with vertical transmission.
//!
//! Susceptibles `S`, infectives `I` and removeds `R` are born at
//! class-specific rates; a fraction of the offspring of infectives is born
//! infected, entering `I` (rate `beta1`) or, when detected at birth, `R`
//! (rate `beta2`). Infection is by proportionate mixing, `lambda I S / N`.
//!
//! The crate provides
//!
//! * [`model`]: parameters, states and the absolute, proportions and planar
//!   vector fields,
//! * [`equilibrium`]: the disease-free and endemic rest points with their
//!   linearizations,
//! * [`thresholds`]: `R0`, `R1`, `R2` and the classification of long-run
//!   behaviour,
//! * [`simulate`]: trajectory integration and the empirical check of that
//!   classification,
//! * [`qualitative`]: the Dulac-type certificate against periodic orbits and
//!   winding-number (Poincaré index) checks,
//! * [`scenario`] and [`pipeline`]: scenario files, reports and sweeps.

pub mod equilibrium;
pub mod integrator;
pub mod model;
pub mod pipeline;
pub mod qualitative;
pub mod scenario;
pub mod simulate;
pub mod thresholds;

pub use equilibrium::{dfe_report, endemic_solve, jacobian_planar, EquilibriumReport, Verdict};
pub use model::{AbsState, ParamName, Params, PlanarState, PropState, Rates};
pub use scenario::Scenario;
pub use simulate::IntegratorConfig;
pub use thresholds::{classify, compute_thresholds, Classification, Thresholds};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Scenario(#[from] scenario::ScenarioError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Equilibrium(#[from] equilibrium::EquilibriumError),
    #[error(transparent)]
    Threshold(#[from] thresholds::ThresholdError),
    #[error(transparent)]
    Simulate(#[from] simulate::SimulateError),
    #[error(transparent)]
    Qualitative(#[from] qualitative::QualitativeError),
    #[error("scenario has no [sweep] section")]
    NoSweep,
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl Error {
    /// `1` for bad input, `2` when an analysis step fails.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Scenario(_) | Error::Model(_) | Error::NoSweep | Error::Io { .. } => 1,
            _ => 2,
        }
    }
}
