//! Parameters, states and the three vector fields of the vertically
//! transmitted SIRS model.
//!
//! The same dynamics are available in three coordinate systems:
//!
//! * absolute class sizes `(S, I, R)`,
//! * proportions `(s, i, r)` on the simplex `s + i + r = 1`,
//! * the planar reduction `(i, r)` obtained by eliminating `s`.
//!
//! Raw `*_rhs` functions evaluate the polynomial right-hand sides at any
//! point (they are used by the integrator and the index computations, which
//! need to step slightly off the feasible region). The typed `field_*`
//! functions take validated states.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when validating states against their region.
pub const STATE_TOL: f64 = 1e-12;

/// Largest simplex drift `|s + i + r - 1|` that is silently renormalized.
pub const RENORMALIZE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter `{0}` is negative")]
    NegativeParameter(ParamName),
    #[error("parameter `{0}` is not finite")]
    NonFiniteParameter(ParamName),
    #[error("b0 + eps1 + alpha must be positive")]
    DegenerateDenominator,
    #[error("total population N = S + I + R must be positive (got {0})")]
    ZeroPopulation(f64),
    #[error("state component `{name}` = {value} is outside the feasible region")]
    OutsideRegion { name: &'static str, value: f64 },
    #[error("proportions sum to {0}, not 1")]
    SimplexViolation(f64),
}

/// The eleven model rates, by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamName {
    B0,
    B1,
    Beta1,
    Beta2,
    B2,
    D,
    Eps1,
    Eps2,
    Alpha,
    Gamma,
    Lambda,
}

impl ParamName {
    pub const ALL: [ParamName; 11] = [
        ParamName::B0,
        ParamName::B1,
        ParamName::Beta1,
        ParamName::Beta2,
        ParamName::B2,
        ParamName::D,
        ParamName::Eps1,
        ParamName::Eps2,
        ParamName::Alpha,
        ParamName::Gamma,
        ParamName::Lambda,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ParamName::B0 => "b0",
            ParamName::B1 => "b1",
            ParamName::Beta1 => "beta1",
            ParamName::Beta2 => "beta2",
            ParamName::B2 => "b2",
            ParamName::D => "d",
            ParamName::Eps1 => "eps1",
            ParamName::Eps2 => "eps2",
            ParamName::Alpha => "alpha",
            ParamName::Gamma => "gamma",
            ParamName::Lambda => "lambda",
        }
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ParamName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown parameter name `{s}`"))
    }
}

/// Unvalidated rates, as read from a scenario file.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rates {
    /// Birth rate of susceptibles.
    pub b0: f64,
    /// Birth rate of infectives, newborn uninfected.
    pub b1: f64,
    /// Birth rate of infectives, newborn infected and entering `I`.
    pub beta1: f64,
    /// Birth rate of infectives, newborn infected and removed at birth.
    pub beta2: f64,
    /// Birth rate of removeds.
    pub b2: f64,
    /// Disease-free death rate.
    pub d: f64,
    /// Excess death rate of infectives.
    pub eps1: f64,
    /// Excess death rate of removeds.
    pub eps2: f64,
    /// Removal rate of infectives.
    pub alpha: f64,
    /// Recovery rate of removeds (back to susceptible).
    pub gamma: f64,
    /// Effective contact rate.
    pub lambda: f64,
}

impl Rates {
    /// Every rate set to `v`.
    pub fn uniform(v: f64) -> Self {
        let mut r = Rates::default();
        for name in ParamName::ALL {
            r.set(name, v);
        }
        r
    }

    pub fn get(&self, name: ParamName) -> f64 {
        match name {
            ParamName::B0 => self.b0,
            ParamName::B1 => self.b1,
            ParamName::Beta1 => self.beta1,
            ParamName::Beta2 => self.beta2,
            ParamName::B2 => self.b2,
            ParamName::D => self.d,
            ParamName::Eps1 => self.eps1,
            ParamName::Eps2 => self.eps2,
            ParamName::Alpha => self.alpha,
            ParamName::Gamma => self.gamma,
            ParamName::Lambda => self.lambda,
        }
    }

    pub fn set(&mut self, name: ParamName, value: f64) {
        let slot = match name {
            ParamName::B0 => &mut self.b0,
            ParamName::B1 => &mut self.b1,
            ParamName::Beta1 => &mut self.beta1,
            ParamName::Beta2 => &mut self.beta2,
            ParamName::B2 => &mut self.b2,
            ParamName::D => &mut self.d,
            ParamName::Eps1 => &mut self.eps1,
            ParamName::Eps2 => &mut self.eps2,
            ParamName::Alpha => &mut self.alpha,
            ParamName::Gamma => &mut self.gamma,
            ParamName::Lambda => &mut self.lambda,
        };
        *slot = value;
    }

    pub fn validate(self) -> Result<Params, ModelError> {
        Params::new(self)
    }
}

/// Validated rates. Dereferences to [`Rates`] for read access; the total
/// vertical transmission rate `beta = beta1 + beta2` is always derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "ParamsEcho")]
pub struct Params(Rates);

impl Params {
    pub fn new(rates: Rates) -> Result<Self, ModelError> {
        for name in ParamName::ALL {
            let v = rates.get(name);
            if !v.is_finite() {
                return Err(ModelError::NonFiniteParameter(name));
            }
            if v < 0.0 {
                return Err(ModelError::NegativeParameter(name));
            }
        }
        if rates.b0 + rates.eps1 + rates.alpha <= 0.0 {
            return Err(ModelError::DegenerateDenominator);
        }
        Ok(Params(rates))
    }

    pub fn rates(&self) -> Rates {
        self.0
    }

    pub fn beta(&self) -> f64 {
        self.0.beta1 + self.0.beta2
    }

    /// Copy with one rate replaced, revalidated.
    pub fn with(&self, name: ParamName, value: f64) -> Result<Self, ModelError> {
        let mut r = self.0;
        r.set(name, value);
        Params::new(r)
    }
}

impl Deref for Params {
    type Target = Rates;

    fn deref(&self) -> &Rates {
        &self.0
    }
}

/// Serialized form of [`Params`]: the rates plus the derived `beta`.
#[derive(Serialize)]
struct ParamsEcho {
    #[serde(flatten)]
    rates: Rates,
    beta: f64,
}

impl From<Params> for ParamsEcho {
    fn from(p: Params) -> Self {
        ParamsEcho {
            rates: p.0,
            beta: p.beta(),
        }
    }
}

/// Absolute class sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsState {
    pub susceptible: f64,
    pub infective: f64,
    pub removed: f64,
}

impl AbsState {
    pub fn new(susceptible: f64, infective: f64, removed: f64) -> Result<Self, ModelError> {
        for (name, v) in [("S", susceptible), ("I", infective), ("R", removed)] {
            if !v.is_finite() || v < 0.0 {
                return Err(ModelError::OutsideRegion { name, value: v });
            }
        }
        let x = AbsState {
            susceptible,
            infective,
            removed,
        };
        if x.total() <= 0.0 {
            return Err(ModelError::ZeroPopulation(x.total()));
        }
        Ok(x)
    }

    pub fn total(&self) -> f64 {
        self.susceptible + self.infective + self.removed
    }

    pub fn proportions(&self) -> PropState {
        let n = self.total();
        PropState::new(self.susceptible / n, self.infective / n, self.removed / n)
            .expect("nonnegative classes with positive total lie on the simplex")
    }
}

/// A point of the simplex `D = {s, i, r >= 0, s + i + r = 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropState {
    s: f64,
    i: f64,
    r: f64,
}

impl PropState {
    pub const DISEASE_FREE: PropState = PropState {
        s: 1.0,
        i: 0.0,
        r: 0.0,
    };

    /// Validates `(s, i, r)`. Components down to `-1e-12` are clamped to
    /// zero; a sum within `1e-9` of one is renormalized.
    pub fn new(s: f64, i: f64, r: f64) -> Result<Self, ModelError> {
        let mut x = [s, i, r];
        for (v, name) in x.iter_mut().zip(["s", "i", "r"]) {
            if !v.is_finite() || *v < -STATE_TOL {
                return Err(ModelError::OutsideRegion { name, value: *v });
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let sum = x[0] + x[1] + x[2];
        if (sum - 1.0).abs() > RENORMALIZE_TOL {
            return Err(ModelError::SimplexViolation(sum));
        }
        if sum != 1.0 {
            x.iter_mut().for_each(|v| *v /= sum);
        }
        Ok(PropState {
            s: x[0],
            i: x[1],
            r: x[2],
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn i(&self) -> f64 {
        self.i
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.s, self.i, self.r]
    }

    /// Drops `s`.
    pub fn project(&self) -> PlanarState {
        PlanarState {
            i: self.i,
            r: self.r,
        }
    }
}

/// A point of the triangle `D1 = {i, r >= 0, i + r <= 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanarState {
    i: f64,
    r: f64,
}

impl PlanarState {
    pub const ORIGIN: PlanarState = PlanarState { i: 0.0, r: 0.0 };

    pub fn new(i: f64, r: f64) -> Result<Self, ModelError> {
        let mut x = [i, r];
        for (v, name) in x.iter_mut().zip(["i", "r"]) {
            if !v.is_finite() || *v < -STATE_TOL {
                return Err(ModelError::OutsideRegion { name, value: *v });
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let sum = x[0] + x[1];
        if sum > 1.0 + STATE_TOL {
            return Err(ModelError::SimplexViolation(sum));
        }
        if sum > 1.0 {
            x.iter_mut().for_each(|v| *v /= sum);
        }
        Ok(PlanarState { i: x[0], r: x[1] })
    }

    pub fn i(&self) -> f64 {
        self.i
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn to_array(&self) -> [f64; 2] {
        [self.i, self.r]
    }

    /// Restores `s = 1 - i - r`.
    pub fn lift(&self) -> PropState {
        PropState {
            s: 1.0 - self.i - self.r,
            i: self.i,
            r: self.r,
        }
    }
}

/// Right-hand side of the absolute system at `(S, I, R)`; requires `N > 0`.
pub fn absolute_rhs(p: &Params, x: [f64; 3]) -> [f64; 3] {
    let [s, i, r] = x;
    let n = s + i + r;
    let incidence = p.lambda * i * s / n;
    [
        (p.b0 - p.d) * s + p.b1 * i + (p.b2 + p.gamma) * r - incidence,
        (p.beta1 - p.d - p.eps1 - p.alpha) * i + incidence,
        (p.beta2 + p.alpha) * i - (p.d + p.eps2 + p.gamma) * r,
    ]
}

/// Right-hand side of the proportions system at `(s, i, r)`. Evaluates the
/// polynomial as written, so it is defined off the simplex as well.
pub fn proportions_rhs(p: &Params, x: [f64; 3]) -> [f64; 3] {
    let [s, i, r] = x;
    let beta = p.beta();
    let infective_births = p.b1 + beta - p.eps1;
    let removed_births = p.b2 - p.eps2;
    [
        p.b0 * s + p.b1 * i + (p.b2 + p.gamma) * r
            - p.b0 * s * s
            - (p.b1 + beta + p.lambda - p.eps1) * i * s
            - removed_births * s * r,
        (p.beta1 - p.eps1 - p.alpha) * i + (p.lambda - p.b0) * i * s
            - infective_births * i * i
            - removed_births * i * r,
        (p.beta2 + p.alpha) * i
            - (p.eps2 + p.gamma) * r
            - p.b0 * s * r
            - infective_births * i * r
            - removed_births * r * r,
    ]
}

/// Coefficients of the planar quadratic system
///
/// ```text
/// i' = a i + b i^2 + c i r
/// r' = e i - g r + h i r + k r^2
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarCoefficients {
    /// `lambda + beta1 - b0 - eps1 - alpha`; the DFE growth rate of `i`.
    pub a: f64,
    /// `b0 + eps1 - lambda - b1 - beta`.
    pub b: f64,
    /// `b0 + eps2 - lambda - b2`.
    pub c: f64,
    /// `beta2 + alpha`; inflow into `R`.
    pub e: f64,
    /// `b0 + eps2 + gamma`.
    pub g: f64,
    /// `b0 + eps1 - b1 - beta`.
    pub h: f64,
    /// `b0 + eps2 - b2`.
    pub k: f64,
}

impl PlanarCoefficients {
    pub fn new(p: &Params) -> Self {
        let beta = p.beta();
        PlanarCoefficients {
            a: p.lambda + p.beta1 - p.b0 - p.eps1 - p.alpha,
            b: p.b0 + p.eps1 - p.lambda - p.b1 - beta,
            c: p.b0 + p.eps2 - p.lambda - p.b2,
            e: p.beta2 + p.alpha,
            g: p.b0 + p.eps2 + p.gamma,
            h: p.b0 + p.eps1 - p.b1 - beta,
            k: p.b0 + p.eps2 - p.b2,
        }
    }

    pub fn rhs(&self, x: [f64; 2]) -> [f64; 2] {
        let [i, r] = x;
        [
            self.a * i + self.b * i * i + self.c * i * r,
            self.e * i - self.g * r + self.h * i * r + self.k * r * r,
        ]
    }
}

/// Right-hand side of the planar system at any `(i, r)`.
pub fn planar_rhs(p: &Params, x: [f64; 2]) -> [f64; 2] {
    PlanarCoefficients::new(p).rhs(x)
}

pub fn field_absolute(p: &Params, x: &AbsState) -> Result<[f64; 3], ModelError> {
    let n = x.total();
    if n.is_nan() || n <= 0.0 {
        return Err(ModelError::ZeroPopulation(n));
    }
    Ok(absolute_rhs(p, [x.susceptible, x.infective, x.removed]))
}

pub fn field_proportions(p: &Params, x: &PropState) -> [f64; 3] {
    proportions_rhs(p, x.to_array())
}

pub fn field_planar(p: &Params, x: &PlanarState) -> [f64; 2] {
    planar_rhs(p, x.to_array())
}

/// Per-capita growth rate of the total population, `N'/N`, at proportions
/// `(s, i, r)`.
pub fn population_growth_rate(p: &Params, x: [f64; 3]) -> f64 {
    let [s, i, r] = x;
    p.b0 * s + (p.b1 + p.beta() - p.eps1) * i + (p.b2 - p.eps2) * r - p.d
}

/// Per-capita growth rate of the infectives, `I'/I`, at susceptible
/// proportion `s`.
pub fn infective_growth_rate(p: &Params, s: f64) -> f64 {
    (p.beta1 - p.d - p.eps1 - p.alpha) + p.lambda * s
}
