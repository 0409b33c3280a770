//! End-to-end analysis of a scenario: thresholds, equilibria,
//! classification, qualitative certificates and the simulation cross-check,
//! plus parameter sweeps and CSV output.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::{all_rest_points, dfe_report, endemic_solve, EquilibriumReport, Verdict};
use crate::model::{Params, PropState};
use crate::qualitative::{
    boundary_curve, capsule, circle, dulac_check, winding_index, DulacSummary,
};
use crate::scenario::Scenario;
use crate::simulate::{
    random_interior_state, verify_classification_from, AbsoluteTrajectory, VerificationReport,
    START_MARGIN,
};
use crate::thresholds::{classify, compute_thresholds, Classification, Thresholds};
use crate::Error;

pub const REPORT_SCHEMA: u32 = 1;
pub const DULAC_GRID: usize = 50;
pub const DULAC_MARGIN: f64 = 1e-3;
const CURVE_VERTICES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindingCheck {
    pub curve: String,
    pub expected: i32,
    pub index: Option<i32>,
    pub error: Option<String>,
}

impl WindingCheck {
    pub fn passed(&self) -> bool {
        self.index == Some(self.expected)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub schema: u32,
    pub seed: u64,
    pub params: Params,
    pub thresholds: Option<Thresholds>,
    pub classification: Option<Classification>,
    pub dfe: EquilibriumReport,
    pub endemic: Option<EquilibriumReport>,
    pub endemic_error: Option<String>,
    pub dulac: Option<DulacSummary>,
    pub dulac_error: Option<String>,
    pub winding: Vec<WindingCheck>,
    pub verification: Option<VerificationReport>,
    pub verification_error: Option<String>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyReport {
    pub schema: u32,
    pub params: Params,
    pub dulac: Option<DulacSummary>,
    pub dulac_error: Option<String>,
    pub winding: Vec<WindingCheck>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl CertifyReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn dist_to_segment(x: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((x[0] - a[0]) * dx + (x[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(x, [a[0] + t * dx, a[1] + t * dy])
}

fn run_winding(p: &Params, name: &str, expected: i32, curve: &[[f64; 2]]) -> WindingCheck {
    let (index, error) = match winding_index(p, curve) {
        Ok(k) => (Some(k), None),
        Err(e) => (None, Some(e.to_string())),
    };
    WindingCheck {
        curve: name.to_string(),
        expected,
        index,
        error,
    }
}

/// Index checks around the origin, the endemic point, the boundary-hugging
/// curve and a curve enclosing both rest points.
pub fn winding_checks(p: &Params, endemic: Option<&EquilibriumReport>) -> Vec<WindingCheck> {
    let origin = [0.0, 0.0];
    let dfe = dfe_report(p);
    let mut out = Vec::new();
    let others: Vec<[f64; 2]> = all_rest_points(p).unwrap_or_default();
    match endemic {
        Some(eq) => {
            let x = eq.location.to_array();
            let far: Vec<[f64; 2]> = others
                .iter()
                .copied()
                .filter(|&q| dist(q, origin) > 1e-9 && dist(q, x) > 1e-9)
                .collect();
            let sep = dist(x, origin);
            let clear = far
                .iter()
                .map(|&q| dist_to_segment(q, origin, x))
                .fold(f64::INFINITY, f64::min);
            let rho = 0.01f64.min(0.4 * sep).min(0.4 * clear);
            out.push(run_winding(
                p,
                "endemic_circle",
                1,
                &circle(x, rho, CURVE_VERTICES),
            ));
            out.push(run_winding(
                p,
                "origin_circle",
                -1,
                &circle(origin, rho, CURVE_VERTICES),
            ));
            let notch = 0.01f64.min(0.5 * sep);
            out.push(run_winding(
                p,
                "boundary_curve",
                1,
                &boundary_curve(p, 1e-3, notch, 50),
            ));
            out.push(run_winding(
                p,
                "enclosing_capsule",
                0,
                &capsule(origin, x, rho, 4 * CURVE_VERTICES),
            ));
        }
        None => {
            if dfe.verdict == Verdict::AsymptoticallyStable {
                out.push(run_winding(
                    p,
                    "origin_circle",
                    1,
                    &circle(origin, 0.01, CURVE_VERTICES),
                ));
            }
            out.push(run_winding(
                p,
                "boundary_curve",
                0,
                &boundary_curve(p, 1e-3, 0.01, 50),
            ));
        }
    }
    out
}

fn qualitative_section(
    p: &Params,
    endemic: Option<&EquilibriumReport>,
    checks: &mut Vec<Check>,
) -> (Option<DulacSummary>, Option<String>, Vec<WindingCheck>) {
    let (dulac, dulac_error) = match dulac_check(p, DULAC_GRID, DULAC_MARGIN) {
        Ok(s) => {
            checks.push(Check::new(
                "dulac_g_dot_f",
                s.g_dot_f_ok,
                format!("max |g.f| = {:e}", s.max_abs_g_dot_f),
            ));
            checks.push(Check::new(
                "dulac_curl_negative",
                s.vacuous || s.curl_negative,
                if s.vacuous {
                    "criterion vacuous: all numerators vanish".to_string()
                } else {
                    format!("max (curl g).(1,1,1) = {:e}", s.max_curl_dot_ones)
                },
            ));
            checks.push(Check::new(
                "dulac_curl_finite_difference",
                s.curl_fd_ok,
                format!("max relative error {:e}", s.max_curl_rel_error),
            ));
            (Some(s), None)
        }
        Err(e) => {
            checks.push(Check::new("dulac", false, e.to_string()));
            (None, Some(e.to_string()))
        }
    };
    let winding = winding_checks(p, endemic);
    for w in &winding {
        let detail = match (&w.index, &w.error) {
            (Some(k), _) => format!("index {k}, expected {}", w.expected),
            (None, Some(e)) => e.clone(),
            (None, None) => String::new(),
        };
        checks.push(Check::new(
            &format!("winding_{}", w.curve),
            w.passed(),
            detail,
        ));
    }
    (dulac, dulac_error, winding)
}

/// Qualitative certificates only.
pub fn certify(sc: &Scenario) -> CertifyReport {
    let p = &sc.params;
    let mut checks = Vec::new();
    let endemic = endemic_solve(p).ok().flatten();
    let (dulac, dulac_error, winding) = qualitative_section(p, endemic.as_ref(), &mut checks);
    let passed = checks.iter().all(|c| c.passed);
    CertifyReport {
        schema: REPORT_SCHEMA,
        params: *p,
        dulac,
        dulac_error,
        winding,
        checks,
        passed,
    }
}

/// Explicit initial states followed by `random_starts` seeded draws.
pub fn verification_starts(sc: &Scenario) -> Vec<PropState> {
    let mut starts: Vec<PropState> = sc.initial_states.iter().map(|s| s.proportions()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    starts.extend((0..sc.random_starts).map(|_| random_interior_state(&mut rng, START_MARGIN)));
    starts
}

pub fn analyze(sc: &Scenario) -> AnalysisReport {
    let p = &sc.params;
    let mut checks = Vec::new();
    let dfe = dfe_report(p);

    let (endemic, endemic_error) = match endemic_solve(p) {
        Ok(e) => (e, None),
        Err(e) => (None, Some(e.to_string())),
    };
    let r0 = crate::thresholds::basic_reproduction_number(p);
    checks.push(Check::new(
        "endemic_uniqueness",
        endemic_error.is_none() && (r0 > 1.0) == endemic.is_some(),
        match (&endemic, &endemic_error) {
            (_, Some(e)) => e.clone(),
            (Some(_), None) => "unique interior rest point".to_string(),
            (None, None) => "no interior rest point (R0 <= 1)".to_string(),
        },
    ));
    if let Some(eq) = &endemic {
        checks.push(Check::new(
            "endemic_trace_negative",
            eq.trace < 0.0,
            format!("trace = {:e}", eq.trace),
        ));
        checks.push(Check::new(
            "endemic_hyperbolic_attractor",
            eq.verdict == Verdict::HyperbolicAttractor,
            format!("{:?}", eq.verdict),
        ));
        checks.push(Check::new(
            "endemic_residual",
            eq.residual <= 1e-11,
            format!("{:e}", eq.residual),
        ));
    }

    let (thresholds, classification) = match compute_thresholds(p, endemic.as_ref()) {
        Ok(t) => {
            let gn_ok = (t.r1 - 1.0).abs() <= 1e-9 || (t.growth_n > 0.0) == (t.r1 > 1.0);
            let gi_ok = (t.r2 - 1.0).abs() <= 1e-9 || (t.growth_i > 0.0) == (t.r2 > 1.0);
            checks.push(Check::new(
                "growth_sign_n",
                gn_ok,
                format!("g_N = {:e}, R1 = {}", t.growth_n, t.r1),
            ));
            checks.push(Check::new(
                "growth_sign_i",
                gi_ok,
                format!("g_I = {:e}, R2 = {}", t.growth_i, t.r2),
            ));
            (Some(t), Some(classify(&t)))
        }
        Err(e) => {
            checks.push(Check::new("thresholds", false, e.to_string()));
            (None, None)
        }
    };

    let (dulac, dulac_error, winding) = qualitative_section(p, endemic.as_ref(), &mut checks);

    let starts = verification_starts(sc);
    let (verification, verification_error) = if thresholds.is_some() && !starts.is_empty() {
        match verify_classification_from(p, &starts, &sc.integrator) {
            Ok(v) => {
                let failed = v.starts.iter().filter(|s| !s.passed).count();
                checks.push(Check::new(
                    "simulation_cross_check",
                    v.passed,
                    format!(
                        "{} of {} starts agree",
                        v.starts.len() - failed,
                        v.starts.len()
                    ),
                ));
                (Some(v), None)
            }
            Err(e) => {
                checks.push(Check::new("simulation_cross_check", false, e.to_string()));
                (None, Some(e.to_string()))
            }
        }
    } else {
        (None, None)
    };

    let passed = checks.iter().all(|c| c.passed);
    AnalysisReport {
        schema: REPORT_SCHEMA,
        seed: sc.seed,
        params: *p,
        thresholds,
        classification,
        dfe,
        endemic,
        endemic_error,
        dulac,
        dulac_error,
        winding,
        verification,
        verification_error,
        checks,
        passed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    pub endemic: Option<PropState>,
    pub table_row: Option<u8>,
    pub growth_n: f64,
    pub growth_i: f64,
}

pub fn sweep_point(p: &Params, value: f64) -> Result<SweepRow, Error> {
    let endemic = endemic_solve(p)?;
    let t = compute_thresholds(p, endemic.as_ref())?;
    Ok(SweepRow {
        value,
        r0: t.r0,
        r1: t.r1,
        r2: t.r2,
        endemic: endemic.map(|e| e.lifted),
        table_row: classify(&t).table_row,
        growth_n: t.growth_n,
        growth_i: t.growth_i,
    })
}

/// Evaluates every sweep point, in parallel, in sweep order.
pub fn sweep(sc: &Scenario) -> Result<Vec<SweepRow>, Error> {
    let sw = sc.sweep.ok_or(Error::NoSweep)?;
    sw.values()
        .into_par_iter()
        .map(|v| {
            let p = sw.apply(&sc.params, v)?;
            sweep_point(&p, v)
        })
        .collect()
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub const SWEEP_HEADER: &str = "value,r0,r1,r2,i_star,r_star,s_star,table_row,growth_n,growth_i";

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for row in rows {
        let (i, r, s) = match row.endemic {
            Some(e) => (fmt_f64(e.i()), fmt_f64(e.r()), fmt_f64(e.s())),
            None => (String::new(), String::new(), String::new()),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(row.value),
            fmt_f64(row.r0),
            fmt_f64(row.r1),
            fmt_f64(row.r2),
            i,
            r,
            s,
            row.table_row.map(|k| k.to_string()).unwrap_or_default(),
            fmt_f64(row.growth_n),
            fmt_f64(row.growth_i),
        )?;
    }
    Ok(())
}

pub const TRAJECTORY_HEADER: &str = "t,s,i,r,logN,S,I,R";

pub fn write_trajectory_csv<W: Write>(traj: &AbsoluteTrajectory, mut w: W) -> io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for (k, (t, x)) in traj.times.iter().zip(&traj.states).enumerate() {
        let [big_s, big_i, big_r] = traj.classes(k);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(*t),
            fmt_f64(x[0]),
            fmt_f64(x[1]),
            fmt_f64(x[2]),
            fmt_f64(x[3]),
            fmt_f64(big_s),
            fmt_f64(big_i),
            fmt_f64(big_r),
        )?;
    }
    Ok(())
}
