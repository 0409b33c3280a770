//! Rest points of the planar system and their linear stability.
//!
//! Interior rest points lie on the line `a + b i + c r = 0` (the `i'`
//! nullcline with the factor `i` removed) and on the conic `r' = 0`.
//! Parametrizing the line by one coordinate turns the intersection into a
//! univariate quadratic, which is solved in closed form and then polished
//! with Newton's method on the full planar field.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::model::{Params, PlanarCoefficients, PlanarState, PropState};
use crate::thresholds::basic_reproduction_number;

/// Distance from the boundary of `D1` below which a root is not interior.
pub const INTERIOR_MARGIN: f64 = 1e-10;
/// Coefficients smaller than this are treated as zero.
pub const COEFF_EPS: f64 = 1e-14;
/// Eigenvalue real parts smaller than this mark a non-hyperbolic point.
pub const HYPERBOLIC_EPS: f64 = 1e-9;
/// Target residual of the Newton polish.
pub const NEWTON_RESIDUAL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error("{0} interior rest points found where exactly one was expected")]
    MultipleInteriorRoots(usize),
    #[error("no interior rest point found although R0 > 1")]
    NoInteriorRoot,
    #[error("rest point ({i}, {r}) lies on the boundary of D1")]
    BoundaryRoot { i: f64, r: f64 },
    #[error("the i-nullcline lies on the conic r' = 0; rest points are not isolated")]
    Degenerate,
    #[error("Newton polish stalled at residual {0:e}")]
    NewtonStalled(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EquilibriumKind {
    DiseaseFree,
    Endemic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    AsymptoticallyStable,
    Saddle,
    HyperbolicAttractor,
    Degenerate,
}

pub type Matrix2 = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub kind: EquilibriumKind,
    pub location: PlanarState,
    pub lifted: PropState,
    pub jacobian: Matrix2,
    #[serde(serialize_with = "serialize_eigenvalues")]
    pub eigenvalues: [Complex64; 2],
    pub trace: f64,
    pub determinant: f64,
    pub verdict: Verdict,
    /// `max(|i'|, |r'|)` at `location`.
    pub residual: f64,
}

fn serialize_eigenvalues<S: serde::Serializer>(
    ev: &[Complex64; 2],
    ser: S,
) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = ser.serialize_seq(Some(2))?;
    for z in ev {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

/// Analytic Jacobian of the planar field.
pub fn jacobian_planar(p: &Params, x: &PlanarState) -> Matrix2 {
    jacobian_at(&PlanarCoefficients::new(p), x.to_array())
}

fn jacobian_at(c: &PlanarCoefficients, x: [f64; 2]) -> Matrix2 {
    let [i, r] = x;
    [
        [c.a + 2.0 * c.b * i + c.c * r, c.c * i],
        [c.e + c.h * r, -c.g + c.h * i + 2.0 * c.k * r],
    ]
}

/// Eigenvalues of a real 2x2 matrix, larger real part first.
pub fn eigenvalues(m: &Matrix2) -> [Complex64; 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let half = 0.5 * tr;
    let disc = half * half - det;
    if disc >= 0.0 {
        let root = disc.sqrt();
        // Avoid cancellation in the smaller-magnitude root.
        let big = if half >= 0.0 {
            half + root
        } else {
            half - root
        };
        let small = if big != 0.0 { det / big } else { 0.0 };
        let (hi, lo) = if big >= small {
            (big, small)
        } else {
            (small, big)
        };
        [Complex64::new(hi, 0.0), Complex64::new(lo, 0.0)]
    } else {
        let im = (-disc).sqrt();
        [Complex64::new(half, im), Complex64::new(half, -im)]
    }
}

/// The disease-free equilibrium, the origin of the planar system.
pub fn dfe_report(p: &Params) -> EquilibriumReport {
    let c = PlanarCoefficients::new(p);
    let jacobian = jacobian_at(&c, [0.0, 0.0]);
    // Lower-triangular at the origin: the eigenvalues are the diagonal.
    let eigenvalues = [
        Complex64::new(p.lambda + p.beta1 - p.b0 - p.eps1 - p.alpha, 0.0),
        Complex64::new(-(p.b0 + p.eps2 + p.gamma), 0.0),
    ];
    let r0 = basic_reproduction_number(p);
    let verdict = if r0 < 1.0 {
        Verdict::AsymptoticallyStable
    } else if r0 > 1.0 {
        Verdict::Saddle
    } else {
        Verdict::Degenerate
    };
    EquilibriumReport {
        kind: EquilibriumKind::DiseaseFree,
        location: PlanarState::ORIGIN,
        lifted: PropState::DISEASE_FREE,
        jacobian,
        eigenvalues,
        trace: jacobian[0][0] + jacobian[1][1],
        determinant: jacobian[0][0] * jacobian[1][1],
        verdict,
        residual: 0.0,
    }
}

/// Real roots of `q2 t^2 + q1 t + q0`, or `None` when all three
/// coefficients vanish.
fn quadratic_roots(q2: f64, q1: f64, q0: f64) -> Option<Vec<f64>> {
    if q2.abs() < COEFF_EPS && q1.abs() < COEFF_EPS {
        return if q0.abs() < COEFF_EPS {
            None
        } else {
            Some(vec![])
        };
    }
    if q2.abs() < COEFF_EPS {
        return Some(vec![-q0 / q1]);
    }
    let disc = q1 * q1 - 4.0 * q2 * q0;
    let scale = q1 * q1 + (4.0 * q2 * q0).abs();
    if disc < 0.0 {
        // Tangential intersection blurred by rounding still counts once.
        return Some(if disc > -1e-14 * scale {
            vec![-q1 / (2.0 * q2)]
        } else {
            vec![]
        });
    }
    let q = -0.5 * (q1 + q1.signum() * disc.sqrt());
    if q == 0.0 {
        return Some(vec![0.0]);
    }
    let (t1, t2) = (q / q2, q0 / q);
    Some(if t1 == t2 { vec![t1] } else { vec![t1, t2] })
}

/// Points where the line `a + b i + c r = 0` meets the conic `r' = 0`,
/// anywhere in the plane. `Err(Degenerate)` when the line lies on the
/// conic; empty when the line itself is empty.
pub fn line_conic_intersections(p: &Params) -> Result<Vec<[f64; 2]>, EquilibriumError> {
    let c = PlanarCoefficients::new(p);
    // (i, r) = base + t * dir along the line.
    let (base, dir) = if c.b.abs() >= c.c.abs() {
        if c.b.abs() < COEFF_EPS {
            return Ok(vec![]);
        }
        ([-c.a / c.b, 0.0], [-c.c / c.b, 1.0])
    } else {
        ([0.0, -c.a / c.c], [1.0, -c.b / c.c])
    };
    // r' = e i - g r + h i r + k r^2 restricted to the line.
    let [i0, r0] = base;
    let [i1, r1] = dir;
    let q0 = c.e * i0 - c.g * r0 + c.h * i0 * r0 + c.k * r0 * r0;
    let q1 = c.e * i1 - c.g * r1 + c.h * (i0 * r1 + i1 * r0) + 2.0 * c.k * r0 * r1;
    let q2 = c.h * i1 * r1 + c.k * r1 * r1;
    let roots = quadratic_roots(q2, q1, q0).ok_or(EquilibriumError::Degenerate)?;
    Ok(roots
        .into_iter()
        .map(|t| [i0 + t * i1, r0 + t * r1])
        .collect())
}

/// Every real rest point of the quadratic planar system, with no regard to
/// the feasible region: the origin, the second rest point on `i = 0` when
/// it exists, and the line/conic intersections.
pub fn all_rest_points(p: &Params) -> Result<Vec<[f64; 2]>, EquilibriumError> {
    let c = PlanarCoefficients::new(p);
    let mut pts = vec![[0.0, 0.0]];
    if c.k.abs() >= COEFF_EPS && c.g != 0.0 {
        pts.push([0.0, c.g / c.k]);
    }
    pts.extend(line_conic_intersections(p)?);
    Ok(pts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Placement {
    Interior,
    Boundary,
    Outside,
}

fn placement(x: [f64; 2]) -> Placement {
    let [i, r] = x;
    let slack = 1.0 - i - r;
    if i > INTERIOR_MARGIN && r > INTERIOR_MARGIN && slack > INTERIOR_MARGIN {
        Placement::Interior
    } else if i >= -INTERIOR_MARGIN && r >= -INTERIOR_MARGIN && slack >= -INTERIOR_MARGIN {
        Placement::Boundary
    } else {
        Placement::Outside
    }
}

fn residual_of(c: &PlanarCoefficients, x: [f64; 2]) -> f64 {
    let f = c.rhs(x);
    f[0].abs().max(f[1].abs())
}

fn newton_polish(c: &PlanarCoefficients, start: [f64; 2]) -> Result<[f64; 2], EquilibriumError> {
    let mut x = start;
    let mut best = (residual_of(c, x), x);
    for _ in 0..50 {
        if best.0 <= NEWTON_RESIDUAL {
            break;
        }
        let f = c.rhs(x);
        let j = jacobian_at(c, x);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let di = (f[0] * j[1][1] - f[1] * j[0][1]) / det;
        let dr = (f[1] * j[0][0] - f[0] * j[1][0]) / det;
        x = [x[0] - di, x[1] - dr];
        let res = residual_of(c, x);
        if res < best.0 {
            best = (res, x);
        } else if res > 1e3 * best.0 {
            break;
        }
    }
    if best.0 <= 1e-11 {
        Ok(best.1)
    } else {
        Err(EquilibriumError::NewtonStalled(best.0))
    }
}

fn endemic_report(p: &Params, x: [f64; 2], residual: f64) -> EquilibriumReport {
    let location = PlanarState::new(x[0], x[1]).expect("interior point lies in D1");
    let jacobian = jacobian_planar(p, &location);
    let eigenvalues = eigenvalues(&jacobian);
    let trace = jacobian[0][0] + jacobian[1][1];
    let determinant = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
    let verdict = if eigenvalues.iter().any(|z| z.re.abs() < HYPERBOLIC_EPS) {
        Verdict::Degenerate
    } else if eigenvalues.iter().all(|z| z.re < 0.0) {
        Verdict::HyperbolicAttractor
    } else if eigenvalues.iter().all(|z| z.re > 0.0) {
        // No verdict name for a source: the trace check reports it.
        Verdict::Degenerate
    } else {
        Verdict::Saddle
    };
    EquilibriumReport {
        kind: EquilibriumKind::Endemic,
        location,
        lifted: location.lift(),
        jacobian,
        eigenvalues,
        trace,
        determinant,
        verdict,
        residual,
    }
}

/// The endemic equilibrium: `None` when `R0 <= 1`, otherwise the unique
/// rest point in the interior of `D1`.
pub fn endemic_solve(p: &Params) -> Result<Option<EquilibriumReport>, EquilibriumError> {
    if basic_reproduction_number(p) <= 1.0 {
        return Ok(None);
    }
    let c = PlanarCoefficients::new(p);
    let candidates = line_conic_intersections(p)?;
    if candidates.is_empty() && c.b.abs() < COEFF_EPS && c.c.abs() < COEFF_EPS {
        return Ok(None);
    }
    let mut interior = Vec::new();
    let mut boundary = None;
    for x in candidates {
        match placement(x) {
            Placement::Interior => interior.push(x),
            Placement::Boundary => boundary = boundary.or(Some(x)),
            Placement::Outside => {}
        }
    }
    match interior.len() {
        0 => Err(match boundary {
            Some([i, r]) => EquilibriumError::BoundaryRoot { i, r },
            None => EquilibriumError::NoInteriorRoot,
        }),
        1 => {
            let x = newton_polish(&c, interior[0])?;
            if placement(x) != Placement::Interior {
                return Err(EquilibriumError::BoundaryRoot { i: x[0], r: x[1] });
            }
            Ok(Some(endemic_report(p, x, residual_of(&c, x))))
        }
        n => Err(EquilibriumError::MultipleInteriorRoots(n)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Rates;

    fn p1() -> Params {
        Rates {
            b0: 0.4,
            b1: 0.3,
            beta1: 0.1,
            beta2: 0.1,
            b2: 0.3,
            d: 0.2,
            eps1: 0.1,
            eps2: 0.1,
            alpha: 0.2,
            gamma: 0.1,
            lambda: 1.0,
        }
        .validate()
        .unwrap()
    }

    #[test]
    fn quadratic_cases() {
        assert_eq!(quadratic_roots(0.0, 0.0, 0.0), None);
        assert_eq!(quadratic_roots(0.0, 0.0, 1.0), Some(vec![]));
        assert_eq!(quadratic_roots(0.0, 2.0, -1.0), Some(vec![0.5]));
        let mut r = quadratic_roots(1.0, -3.0, 2.0).unwrap();
        r.sort_by(f64::total_cmp);
        assert_eq!(r, vec![1.0, 2.0]);
        assert_eq!(quadratic_roots(1.0, 0.0, 1.0), Some(vec![]));
        assert_eq!(quadratic_roots(1.0, -2.0, 1.0), Some(vec![1.0]));
    }

    #[test]
    fn eigenvalues_of_known_matrices() {
        let ev = eigenvalues(&[[2.0, 0.0], [0.0, -3.0]]);
        assert_eq!(ev, [Complex64::new(2.0, 0.0), Complex64::new(-3.0, 0.0)]);
        let ev = eigenvalues(&[[0.0, -1.0], [1.0, 0.0]]);
        assert_eq!(ev[0], Complex64::new(0.0, 1.0));
        assert_eq!(ev[1], Complex64::new(0.0, -1.0));
    }

    #[test]
    fn dfe_verdict_follows_r0() {
        let p = p1();
        let rep = dfe_report(&p);
        assert_eq!(rep.verdict, Verdict::Saddle);
        assert_eq!(
            rep.eigenvalues[0].re,
            p.lambda + p.beta1 - p.b0 - p.eps1 - p.alpha
        );
        assert_eq!(rep.eigenvalues[1].re, -(p.b0 + p.eps2 + p.gamma));
        let stable = p.with(crate::model::ParamName::Lambda, 0.3).unwrap();
        assert_eq!(dfe_report(&stable).verdict, Verdict::AsymptoticallyStable);
    }

    #[test]
    fn dfe_degenerate_at_threshold() {
        // lambda + beta1 = b0 + eps1 + alpha = 0.5 exactly in binary.
        let mut r = Rates::uniform(0.25);
        r.beta1 = 0.0;
        r.lambda = 0.5;
        r.b0 = 0.25;
        r.eps1 = 0.25;
        r.alpha = 0.0;
        let p = r.validate().unwrap();
        assert_eq!(dfe_report(&p).verdict, Verdict::Degenerate);
        assert_eq!(dfe_report(&p).eigenvalues[0].re, 0.0);
    }

    #[test]
    fn jacobian_at_origin_is_linearization() {
        let p = p1();
        let j = jacobian_planar(&p, &PlanarState::ORIGIN);
        assert_eq!(j[0][0], p.lambda + p.beta1 - p.b0 - p.eps1 - p.alpha);
        assert_eq!(j[0][1], 0.0);
        assert_eq!(j[1][0], p.beta2 + p.alpha);
        assert_eq!(j[1][1], -(p.b0 + p.eps2 + p.gamma));
    }

    #[test]
    fn no_endemic_point_below_threshold() {
        let p = p1().with(crate::model::ParamName::Lambda, 0.3).unwrap();
        assert_eq!(endemic_solve(&p), Ok(None));
    }

    #[test]
    fn endemic_point_of_p1_is_interior_attractor() {
        let rep = endemic_solve(&p1()).unwrap().unwrap();
        assert_eq!(rep.kind, EquilibriumKind::Endemic);
        assert_eq!(rep.verdict, Verdict::HyperbolicAttractor);
        assert!(rep.trace < 0.0);
        assert!(rep.residual <= 1e-11);
    }

    #[test]
    fn boundary_root_when_no_inflow_into_removed() {
        // beta2 = alpha = 0: every conic term carries a factor r, so the
        // only candidate is r = 0, i = 0.8 / 1.0.
        let p = Rates {
            b0: 0.3,
            b1: 0.2,
            beta1: 0.2,
            beta2: 0.0,
            b2: 0.1,
            d: 0.1,
            eps1: 0.1,
            eps2: 0.1,
            alpha: 0.0,
            gamma: 0.1,
            lambda: 1.0,
        }
        .validate()
        .unwrap();
        match endemic_solve(&p) {
            Err(EquilibriumError::BoundaryRoot { i, r }) => {
                assert!((i - 0.8).abs() < 1e-14);
                assert!(r.abs() < 1e-14);
            }
            other => panic!("expected boundary root, got {other:?}"),
        }
    }
}
