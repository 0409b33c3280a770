//! Trajectory integration of the planar, proportions and absolute systems,
//! convergence detection, tail growth rates, and the empirical check of the
//! classification table.
//!
//! The absolute system is integrated as `(s, i, r, ln N)`: the proportions
//! follow their own closed system and `ln N` grows at the rate
//! `b0 s + (b1 + beta - eps1) i + (b2 - eps2) r - d`. Unbounded growth or
//! extinction of `N` therefore never overflows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibrium::endemic_solve;
use crate::integrator::{dopri5_step, rk4_step, step_factor, MIN_STEP};
use crate::model::{
    population_growth_rate, proportions_rhs, AbsState, Params, PlanarCoefficients, PlanarState,
    PropState, RENORMALIZE_TOL,
};
use crate::thresholds::{classify, compute_thresholds, ProportionsLimit, Thresholds};
use crate::Error as CrateError;

/// Pre-clamp region violation above which a trajectory is reported as
/// having left the feasible region.
pub const REGION_TOL: f64 = RENORMALIZE_TOL;
/// Violations above this are recorded as `Renormalized` events.
pub const RENORMALIZE_EVENT_TOL: f64 = 1e-12;
/// Minimum number of samples in a growth-rate fit.
pub const MIN_TAIL: usize = 20;
/// Distance to the predicted limit accepted by [`verify_classification`].
pub const LIMIT_TOL: f64 = 1e-6;
/// Margin from the boundary of `D` for random initial states.
pub const START_MARGIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulateError {
    #[error("adaptive step fell below {MIN_STEP:e} at t = {0}")]
    StepSizeUnderflow(f64),
    #[error("step limit exceeded at t = {0}")]
    StepLimitExceeded(f64),
    #[error("invalid initial state: {0}")]
    InvalidInitialState(String),
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("component {0:?} reached zero before the fitting window")]
    ComponentHitZero(Component),
    #[error("fitting window has {0} samples, need at least {MIN_TAIL}")]
    TailTooShort(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    /// Classical fourth-order Runge-Kutta with a fixed step.
    Rk4 { step: f64 },
    /// Dormand-Prince 5(4) with error control.
    Dopri45 { abs_tol: f64, rel_tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub t_max: f64,
    /// Spacing of recorded samples; convergence is judged on samples.
    pub sample_interval: f64,
    /// Upper bound on adaptive steps. Keeps decaying components that sit
    /// below the absolute tolerance accurate in relative terms.
    pub max_step: f64,
    pub convergence_eps: f64,
    pub convergence_window: usize,
    /// Samples recorded after convergence before stopping.
    pub tail_samples: usize,
    pub stop_on_convergence: bool,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Dopri45 {
                abs_tol: 1e-10,
                rel_tol: 1e-10,
            },
            t_max: 5000.0,
            sample_interval: 1.0,
            max_step: 0.1,
            convergence_eps: 1e-8,
            convergence_window: 10,
            tail_samples: 50,
            stop_on_convergence: true,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), SimulateError> {
        let bad = |what: &str| Err(SimulateError::InvalidConfig(what.to_string()));
        match self.method {
            Method::Rk4 { step } if !(step > 0.0 && step.is_finite()) => {
                return bad("step must be positive")
            }
            Method::Dopri45 { abs_tol, rel_tol }
                if !(abs_tol > 0.0
                    && rel_tol > 0.0
                    && abs_tol.is_finite()
                    && rel_tol.is_finite()) =>
            {
                return bad("tolerances must be positive")
            }
            _ => {}
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad("t_max must be positive");
        }
        if !(self.sample_interval > 0.0 && self.sample_interval <= self.t_max) {
            return bad("sample_interval must lie in (0, t_max]");
        }
        if !(self.max_step > 0.0 && self.max_step.is_finite()) {
            return bad("max_step must be positive");
        }
        if self.convergence_eps.is_nan() || self.convergence_eps <= 0.0 {
            return bad("convergence_eps must be positive");
        }
        if self.convergence_window == 0 {
            return bad("convergence_window must be at least 1");
        }
        if (self.t_max / self.sample_interval) > 1e8 {
            return bad("too many samples");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventKind {
    Converged,
    LeftRegion,
    Renormalized,
    Blowup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Samples of one integration. Layout of a state:
/// planar `[i, r]`, proportions `[s, i, r]`, absolute `[s, i, r, ln N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub events: Vec<Event>,
    /// Largest pre-clamping distance outside the feasible region.
    pub max_region_violation: f64,
}

pub type PlanarTrajectory = Trajectory<2>;
pub type ProportionsTrajectory = Trajectory<3>;
pub type AbsoluteTrajectory = Trajectory<4>;

impl<const N: usize> Trajectory<N> {
    pub fn last(&self) -> &[f64; N] {
        self.states
            .last()
            .expect("a trajectory holds at least its initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn converged_at(&self) -> Option<f64> {
        self.events
            .iter()
            .find(|e| e.kind == EventKind::Converged)
            .map(|e| e.time)
    }

    pub fn has_event(&self, kind: EventKind) -> bool {
        self.events.iter().any(|e| e.kind == kind)
    }
}

impl Trajectory<4> {
    /// `(S, I, R)` at sample `k`.
    pub fn classes(&self, k: usize) -> [f64; 3] {
        let [s, i, r, log_n] = self.states[k];
        let n = log_n.exp();
        [n * s, n * i, n * r]
    }
}

trait Flow<const N: usize> {
    fn rhs(&self, y: &[f64; N]) -> [f64; N];
    /// Clamps `y` onto the region and returns the violation found.
    fn admit(&self, y: &mut [f64; N]) -> f64;
    /// Number of leading coordinates used for convergence.
    fn monitored(&self) -> usize;
}

fn admit_simplex(y: &mut [f64]) -> f64 {
    let mut violation = 0.0f64;
    let mut sum = 0.0;
    for v in y.iter_mut().take(3) {
        violation = violation.max(-*v);
        if *v < 0.0 {
            *v = 0.0;
        }
        sum += *v;
    }
    let raw_sum_err = (y[0] + y[1] + y[2] - 1.0).abs();
    violation = violation.max(raw_sum_err);
    if sum > 0.0 && sum != 1.0 {
        for v in y.iter_mut().take(3) {
            *v /= sum;
        }
    }
    violation
}

struct PlanarFlow(PlanarCoefficients);

impl Flow<2> for PlanarFlow {
    fn rhs(&self, y: &[f64; 2]) -> [f64; 2] {
        self.0.rhs(*y)
    }

    fn admit(&self, y: &mut [f64; 2]) -> f64 {
        let violation = (-y[0]).max(-y[1]).max(y[0] + y[1] - 1.0).max(0.0);
        y[0] = y[0].max(0.0);
        y[1] = y[1].max(0.0);
        let sum = y[0] + y[1];
        if sum > 1.0 {
            y[0] /= sum;
            y[1] /= sum;
        }
        violation
    }

    fn monitored(&self) -> usize {
        2
    }
}

struct ProportionsFlow(Params);

impl Flow<3> for ProportionsFlow {
    fn rhs(&self, y: &[f64; 3]) -> [f64; 3] {
        proportions_rhs(&self.0, *y)
    }

    fn admit(&self, y: &mut [f64; 3]) -> f64 {
        admit_simplex(y)
    }

    fn monitored(&self) -> usize {
        3
    }
}

struct AbsoluteFlow(Params);

impl Flow<4> for AbsoluteFlow {
    fn rhs(&self, y: &[f64; 4]) -> [f64; 4] {
        let x = [y[0], y[1], y[2]];
        let [fs, fi, fr] = proportions_rhs(&self.0, x);
        [fs, fi, fr, population_growth_rate(&self.0, x)]
    }

    fn admit(&self, y: &mut [f64; 4]) -> f64 {
        admit_simplex(y)
    }

    fn monitored(&self) -> usize {
        3
    }
}

enum Advance {
    Reached,
    Stopped,
}

struct Driver<'a, const N: usize, F: Flow<N>> {
    flow: &'a F,
    cfg: &'a IntegratorConfig,
    h: f64,
    steps: usize,
    traj: Trajectory<N>,
}

impl<const N: usize, F: Flow<N>> Driver<'_, N, F> {
    /// Applies the region projection after an accepted step.
    fn accept(&mut self, y: &mut [f64; N], t: f64) -> bool {
        if y.iter().any(|v| !v.is_finite()) {
            self.traj.events.push(Event {
                time: t,
                kind: EventKind::Blowup,
            });
            return false;
        }
        let violation = self.flow.admit(y);
        self.traj.max_region_violation = self.traj.max_region_violation.max(violation);
        if violation > REGION_TOL {
            self.traj.events.push(Event {
                time: t,
                kind: EventKind::LeftRegion,
            });
            return false;
        }
        if violation > RENORMALIZE_EVENT_TOL {
            self.traj.events.push(Event {
                time: t,
                kind: EventKind::Renormalized,
            });
        }
        true
    }

    fn count_step(&mut self, t: f64) -> Result<(), SimulateError> {
        self.steps += 1;
        if self.steps > self.cfg.max_steps {
            return Err(SimulateError::StepLimitExceeded(t));
        }
        Ok(())
    }

    fn advance(
        &mut self,
        y: &mut [f64; N],
        t: &mut f64,
        t_next: f64,
    ) -> Result<Advance, SimulateError> {
        let f = |x: &[f64; N]| self.flow.rhs(x);
        match self.cfg.method {
            Method::Rk4 { step } => {
                let span = t_next - *t;
                let n = ((span / step) - 1e-9).ceil().max(1.0) as usize;
                let h = span / n as f64;
                for k in 1..=n {
                    self.count_step(*t)?;
                    let mut y_new = rk4_step(&f, y, h);
                    let t_new = if k == n { t_next } else { *t + h };
                    if !self.accept(&mut y_new, t_new) {
                        return Ok(Advance::Stopped);
                    }
                    *y = y_new;
                    *t = t_new;
                }
            }
            Method::Dopri45 { abs_tol, rel_tol } => {
                while *t < t_next {
                    self.count_step(*t)?;
                    let remaining = t_next - *t;
                    let h = self.h.min(self.cfg.max_step);
                    let truncated = h >= remaining;
                    let step = if truncated { remaining } else { h };
                    let (mut y_new, err) = dopri5_step(&f, y, step, abs_tol, rel_tol);
                    if err.is_finite() && err <= 1.0 {
                        let t_new = if truncated { t_next } else { *t + step };
                        if !self.accept(&mut y_new, t_new) {
                            return Ok(Advance::Stopped);
                        }
                        *y = y_new;
                        *t = t_new;
                        let proposed = step * step_factor(err);
                        self.h = if truncated {
                            self.h.max(proposed)
                        } else {
                            proposed
                        };
                    } else {
                        let factor = if err.is_finite() {
                            step_factor(err)
                        } else {
                            0.2
                        };
                        self.h = step * factor;
                        if self.h < MIN_STEP {
                            return Err(SimulateError::StepSizeUnderflow(*t));
                        }
                    }
                }
            }
        }
        Ok(Advance::Reached)
    }
}

fn run<const N: usize, F: Flow<N>>(
    flow: &F,
    y0: [f64; N],
    cfg: &IntegratorConfig,
) -> Result<Trajectory<N>, SimulateError> {
    cfg.validate()?;
    let mut driver = Driver {
        flow,
        cfg,
        h: cfg.sample_interval.min(0.01),
        steps: 0,
        traj: Trajectory {
            times: vec![0.0],
            states: vec![y0],
            events: Vec::new(),
            max_region_violation: 0.0,
        },
    };
    let m = flow.monitored();
    let mut y = y0;
    let mut t = 0.0;
    let mut calm = 0usize;
    let mut converged_index: Option<usize> = None;
    let mut k = 0u64;
    while t < cfg.t_max {
        k += 1;
        let t_next = (k as f64 * cfg.sample_interval).min(cfg.t_max);
        let outcome = driver.advance(&mut y, &mut t, t_next)?;
        if let Advance::Stopped = outcome {
            break;
        }
        let prev = *driver.traj.last();
        driver.traj.times.push(t);
        driver.traj.states.push(y);
        let diff = (0..m).map(|j| (y[j] - prev[j]).abs()).fold(0.0, f64::max);
        let field = flow.rhs(&y);
        let field_norm = field[..m].iter().map(|v| v.abs()).fold(0.0, f64::max);
        if diff < cfg.convergence_eps && field_norm < cfg.convergence_eps {
            calm += 1;
        } else {
            calm = 0;
        }
        let index = driver.traj.states.len() - 1;
        if converged_index.is_none() && calm >= cfg.convergence_window {
            converged_index = Some(index);
            driver.traj.events.push(Event {
                time: t,
                kind: EventKind::Converged,
            });
        }
        if let Some(ci) = converged_index {
            if cfg.stop_on_convergence && index >= ci + cfg.tail_samples {
                break;
            }
        }
    }
    Ok(driver.traj)
}

pub fn integrate_planar(
    p: &Params,
    x0: &PlanarState,
    cfg: &IntegratorConfig,
) -> Result<PlanarTrajectory, SimulateError> {
    run(&PlanarFlow(PlanarCoefficients::new(p)), x0.to_array(), cfg)
}

pub fn integrate_proportions(
    p: &Params,
    x0: &PropState,
    cfg: &IntegratorConfig,
) -> Result<ProportionsTrajectory, SimulateError> {
    run(&ProportionsFlow(*p), x0.to_array(), cfg)
}

pub fn integrate_absolute(
    p: &Params,
    x0: &AbsState,
    cfg: &IntegratorConfig,
) -> Result<AbsoluteTrajectory, SimulateError> {
    let x = AbsState::new(x0.susceptible, x0.infective, x0.removed)
        .map_err(|e| SimulateError::InvalidInitialState(e.to_string()))?;
    let n = x.total();
    if !n.is_finite() {
        return Err(SimulateError::InvalidInitialState("N is not finite".into()));
    }
    let [s, i, r] = x.proportions().to_array();
    run(&AbsoluteFlow(*p), [s, i, r, n.ln()], cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    N,
    I,
    R,
}

/// Least-squares slope of `ln(component)` against time over the tail of an
/// absolute trajectory. The tail starts at the convergence event of the
/// proportions, or covers the last quarter of the samples when none was
/// recorded.
pub fn empirical_growth(
    traj: &AbsoluteTrajectory,
    component: Component,
) -> Result<f64, SimulateError> {
    let n = traj.states.len();
    let start = match traj.converged_at() {
        Some(tc) => traj.times.iter().position(|&t| t >= tc).unwrap_or(n),
        None => n - (n / 4).max(MIN_TAIL).min(n),
    };
    if n - start < MIN_TAIL {
        return Err(SimulateError::TailTooShort(n - start));
    }
    let mut pts = Vec::with_capacity(n - start);
    for k in start..n {
        let [_, i, r, log_n] = traj.states[k];
        let v = match component {
            Component::N => log_n,
            Component::I | Component::R => {
                let x = if component == Component::I { i } else { r };
                if x.is_nan() || x < f64::MIN_POSITIVE {
                    return Err(SimulateError::ComponentHitZero(component));
                }
                log_n + x.ln()
            }
        };
        pts.push((traj.times[k], v));
    }
    Ok(least_squares_slope(&pts))
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let vm = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for &(t, v) in pts {
        num += (t - tm) * (v - vm);
        den += (t - tm) * (t - tm);
    }
    num / den
}

/// Uniform draw from the simplex, rejected until every component is at
/// least `margin`.
pub fn random_interior_state<R: Rng>(rng: &mut R, margin: f64) -> PropState {
    assert!(margin < 1.0 / 3.0, "margin leaves no interior");
    loop {
        let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
        if u > v {
            std::mem::swap(&mut u, &mut v);
        }
        let x = [u, v - u, 1.0 - v];
        if x.iter().all(|&c| c >= margin) {
            return PropState::new(x[0], x[1], x[2]).expect("simplex draw");
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartOutcome {
    pub initial: PropState,
    pub final_time: f64,
    pub final_proportions: [f64; 3],
    pub converged: bool,
    pub expected_limit: ProportionsLimit,
    pub limit_distance: f64,
    pub limit_ok: bool,
    pub growth_n: Option<f64>,
    pub n_sign_ok: Option<bool>,
    pub growth_i: Option<f64>,
    pub i_sign_ok: Option<bool>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub thresholds: Thresholds,
    pub starts: Vec<StartOutcome>,
    pub passed: bool,
}

fn sign_matches(measured: f64, threshold: f64) -> Option<bool> {
    if (threshold - 1.0).abs() <= 1e-9 {
        None
    } else {
        Some((measured > 0.0) == (threshold > 1.0))
    }
}

fn check_start(
    p: &Params,
    th: &Thresholds,
    expected: ProportionsLimit,
    x0: PropState,
    cfg: &IntegratorConfig,
) -> Result<StartOutcome, SimulateError> {
    let abs = AbsState {
        susceptible: x0.s(),
        infective: x0.i(),
        removed: x0.r(),
    };
    let traj = integrate_absolute(p, &abs, cfg)?;
    let [s, i, r, _] = *traj.last();
    // Starts on the invariant side i = 0 always go to the DFE.
    let expected = if x0.i() == 0.0 {
        ProportionsLimit::DiseaseFree
    } else {
        expected
    };
    let target = match expected {
        ProportionsLimit::DiseaseFree => PropState::DISEASE_FREE,
        ProportionsLimit::Endemic => th.limit,
    };
    let t = target.to_array();
    let limit_distance = (s - t[0]).abs().max((i - t[1]).abs()).max((r - t[2]).abs());
    let limit_ok = limit_distance < LIMIT_TOL && !traj.has_event(EventKind::LeftRegion);
    let growth_n = empirical_growth(&traj, Component::N).ok();
    let n_sign_ok = growth_n.and_then(|g| sign_matches(g, th.r1));
    let (growth_i, i_sign_ok) = if x0.i() > 0.0 {
        let g = empirical_growth(&traj, Component::I).ok();
        (g, g.and_then(|g| sign_matches(g, th.r2)))
    } else {
        (None, None)
    };
    let sign_ok = |measured: Option<f64>, verdict: Option<bool>, threshold: f64, applies: bool| {
        !applies || (threshold - 1.0).abs() <= 1e-9 || (measured.is_some() && verdict == Some(true))
    };
    let passed = limit_ok
        && sign_ok(growth_n, n_sign_ok, th.r1, true)
        && sign_ok(growth_i, i_sign_ok, th.r2, x0.i() > 0.0);
    Ok(StartOutcome {
        initial: x0,
        final_time: traj.final_time(),
        final_proportions: [s, i, r],
        converged: traj.converged_at().is_some(),
        expected_limit: expected,
        limit_distance,
        limit_ok,
        growth_n,
        n_sign_ok,
        growth_i,
        i_sign_ok,
        passed,
    })
}

/// Integrates the absolute system from each start and checks the limit of
/// the proportions and the signs of the measured growth rates of `N` and
/// `I` against the thresholds.
pub fn verify_classification_from(
    p: &Params,
    starts: &[PropState],
    cfg: &IntegratorConfig,
) -> Result<VerificationReport, CrateError> {
    let endemic = endemic_solve(p)?;
    let thresholds = compute_thresholds(p, endemic.as_ref())?;
    let expected = classify(&thresholds).proportions_limit;
    let outcomes = starts
        .par_iter()
        .map(|&x0| check_start(p, &thresholds, expected, x0, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let passed = outcomes.iter().all(|o| o.passed);
    Ok(VerificationReport {
        thresholds,
        starts: outcomes,
        passed,
    })
}

/// [`verify_classification_from`] on `n_starts` random interior states.
pub fn verify_classification(
    p: &Params,
    n_starts: usize,
    cfg: &IntegratorConfig,
    seed: u64,
) -> Result<VerificationReport, CrateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<PropState> = (0..n_starts.max(1))
        .map(|_| random_interior_state(&mut rng, START_MARGIN))
        .collect();
    verify_classification_from(p, &starts, cfg)
}
