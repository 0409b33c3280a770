//! Threshold parameters and the asymptotic classification table.
//!
//! * `R0` decides between the disease-free and the endemic proportions.
//! * `R1` decides whether the total population grows or dies out.
//! * `R2` decides whether the number of infectives grows or dies out.
//!
//! `R1` and `R2` are piecewise: above `R0 = 1` they are evaluated at the
//! endemic proportions `(s*, i*, r*)`.

use serde::Serialize;
use thiserror::Error;

use crate::equilibrium::{EquilibriumKind, EquilibriumReport};
use crate::model::{infective_growth_rate, population_growth_rate, Params, PropState};

/// Thresholds within this distance of one are treated as equalities.
pub const EQUALITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThresholdError {
    #[error("denominator of {0} vanishes")]
    DegenerateDenominator(&'static str),
    #[error("R0 > 1 but no endemic equilibrium report was supplied")]
    MissingEndemic,
}

/// `R0 = (lambda + beta1) / (b0 + eps1 + alpha)`. Validated parameters
/// guarantee a positive denominator.
pub fn basic_reproduction_number(p: &Params) -> f64 {
    (p.lambda + p.beta1) / (p.b0 + p.eps1 + p.alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// `R0 <= 1`, evaluated at the DFE proportions `(1, 0, 0)`.
    DiseaseFree,
    /// `R0 > 1`, evaluated at the endemic proportions.
    Endemic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    pub branch: Branch,
    /// Limit proportions used for `r1`, `r2` and the growth rates.
    pub limit: PropState,
    /// Limit of `N'/N`; has the sign of `r1 - 1`.
    pub growth_n: f64,
    /// Limit of `I'/I`; has the sign of `r2 - 1`.
    pub growth_i: f64,
}

pub fn compute_thresholds(
    p: &Params,
    endemic: Option<&EquilibriumReport>,
) -> Result<Thresholds, ThresholdError> {
    let r0 = basic_reproduction_number(p);
    let infective_exit = p.d + p.eps1 + p.alpha;
    if infective_exit <= 0.0 {
        return Err(ThresholdError::DegenerateDenominator("R2"));
    }
    if r0 <= 1.0 {
        if p.d <= 0.0 {
            return Err(ThresholdError::DegenerateDenominator("R1"));
        }
        let limit = PropState::DISEASE_FREE;
        return Ok(Thresholds {
            r0,
            r1: p.b0 / p.d,
            r2: (p.beta1 + p.lambda) / infective_exit,
            branch: Branch::DiseaseFree,
            limit,
            growth_n: p.b0 - p.d,
            growth_i: p.beta1 - p.d - p.eps1 - p.alpha + p.lambda,
        });
    }
    let eq = endemic
        .filter(|e| e.kind == EquilibriumKind::Endemic)
        .ok_or(ThresholdError::MissingEndemic)?;
    let limit = eq.lifted;
    let [s, i, r] = limit.to_array();
    let deaths = p.d + p.eps1 * i + p.eps2 * r;
    if deaths <= 0.0 {
        return Err(ThresholdError::DegenerateDenominator("R1"));
    }
    Ok(Thresholds {
        r0,
        r1: (p.b0 * s + (p.b1 + p.beta()) * i + p.b2 * r) / deaths,
        r2: (p.beta1 + p.lambda * s) / infective_exit,
        branch: Branch::Endemic,
        limit,
        growth_n: population_growth_rate(p, [s, i, r]),
        growth_i: infective_growth_rate(p, s),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PopulationLimit {
    Zero,
    Infinity,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProportionsLimit {
    DiseaseFree,
    Endemic,
}

/// Limit of `(S, I, R)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ClassLimit {
    AllZero,
    SusceptiblesOnlyUnbounded,
    AllUnbounded,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub n_limit: PopulationLimit,
    pub proportions_limit: ProportionsLimit,
    pub sir_limit: ClassLimit,
    /// Row of the five-row summary table, 1-based.
    pub table_row: Option<u8>,
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Below,
    Above,
    On,
}

fn side(x: f64) -> Side {
    if (x - 1.0).abs() <= EQUALITY_TOL {
        Side::On
    } else if x < 1.0 {
        Side::Below
    } else {
        Side::Above
    }
}

pub fn classify(t: &Thresholds) -> Classification {
    let proportions_limit = if t.r0 <= 1.0 {
        ProportionsLimit::DiseaseFree
    } else {
        ProportionsLimit::Endemic
    };
    let endemic = proportions_limit == ProportionsLimit::Endemic;
    let row = match (endemic, side(t.r1), side(t.r2)) {
        (false, Side::Below, Side::Below) => Some(1),
        (true, Side::Below, Side::Below) => Some(2),
        (false, Side::Above, Side::Below) => Some(3),
        (false, Side::Above, Side::Above) => Some(4),
        (true, Side::Above, Side::Above) => Some(5),
        _ => None,
    };
    let (n_limit, sir_limit) = match row {
        Some(1 | 2) => (PopulationLimit::Zero, ClassLimit::AllZero),
        Some(3) => (
            PopulationLimit::Infinity,
            ClassLimit::SusceptiblesOnlyUnbounded,
        ),
        Some(_) => (PopulationLimit::Infinity, ClassLimit::AllUnbounded),
        None => {
            let n = match side(t.r1) {
                Side::Below => PopulationLimit::Zero,
                Side::Above => PopulationLimit::Infinity,
                Side::On => PopulationLimit::Indeterminate,
            };
            (n, ClassLimit::Indeterminate)
        }
    };
    Classification {
        n_limit,
        proportions_limit,
        sir_limit,
        table_row: row,
    }
}
