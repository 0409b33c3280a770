//! Numerical certificates for the absence of periodic orbits and for the
//! index count behind uniqueness of the endemic equilibrium.
//!
//! The Dulac-type field is `g = g1 + g2 + g3` with
//!
//! ```text
//! g1(i, r) = [0, -f3/(i r),  f2/(i r)]
//! g2(s, r) = [ f3/(s r), 0, -f1/(s r)]
//! g3(s, i) = [-f2/(s i),  f1/(s i), 0]
//! ```
//!
//! where each `f_k` is the proportions field with the missing coordinate
//! eliminated through `s + i + r = 1`. Each `g_k` is orthogonal to `f`, and
//! `(curl g) . (1, 1, 1) = -(b1/(s^2 r) + (b2 + gamma)/(s^2 i) + (beta2 + alpha)/(s r^2))`.
//! Both facts are checked pointwise; the curl is also differentiated
//! numerically from `g`.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::equilibrium::dfe_report;
use crate::model::{proportions_rhs, Params, PlanarCoefficients, PropState};

/// Smallest admissible distance of a grid node from the boundary of `D`.
pub const MIN_MARGIN: f64 = 1e-3;
pub const G_DOT_F_TOL: f64 = 1e-10;
pub const CURL_REL_TOL: f64 = 1e-5;
/// Largest angle change of the field between adjacent curve vertices.
const MAX_TURN: f64 = PI / 8.0;
const MAX_DEPTH: u32 = 40;
/// Field magnitude treated as a rest point on a curve.
const REST_EPS: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QualitativeError {
    #[error("margin {0} is below the minimum {MIN_MARGIN}")]
    MarginTooSmall(f64),
    #[error("grid must have at least 10 subdivisions and a margin below 1/3")]
    InvalidGrid,
    #[error("curve needs at least three vertices")]
    CurveTooShort,
    #[error("the field vanishes on the curve near ({0}, {1})")]
    RestPointOnCurve(f64, f64),
    #[error("could not resolve the field rotation near ({0}, {1})")]
    RefinementExhausted(f64, f64),
    #[error("total rotation {0} is not close to an integer")]
    NonIntegralWinding(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DulacSample {
    pub point: PropState,
    pub g_dot_f: f64,
    pub curl_dot_ones: f64,
    pub curl_dot_ones_fd: f64,
}

/// Proportions field at `(s, i, r)` with one coordinate already eliminated.
fn f(p: &Params, s: f64, i: f64, r: f64) -> [f64; 3] {
    proportions_rhs(p, [s, i, r])
}

/// Proportions field evaluated with `s`, `i` and `r` in turn eliminated
/// through `s + i + r = 1`.
fn eliminated_fields(p: &Params, x: [f64; 3]) -> [[f64; 3]; 3] {
    let [s, i, r] = x;
    [
        f(p, 1.0 - i - r, i, r),
        f(p, s, 1.0 - s - r, r),
        f(p, s, i, 1.0 - s - i),
    ]
}

/// `g` at a point of the (extended) `(s, i, r)` space; `g_k` depends only on
/// its two coordinates.
pub fn dulac_field(p: &Params, x: [f64; 3]) -> [f64; 3] {
    let [s, i, r] = x;
    let [f1, f2, f3] = eliminated_fields(p, x);
    // g1(i, r), g2(s, r), g3(s, i)
    let (ir, sr, si) = (i * r, s * r, s * i);
    let g1 = [0.0, -f1[2] / ir, f1[1] / ir];
    let g2 = [f2[2] / sr, 0.0, -f2[0] / sr];
    let g3 = [-f3[1] / si, f3[0] / si, 0.0];
    [
        g1[0] + g2[0] + g3[0],
        g1[1] + g2[1] + g3[1],
        g1[2] + g2[2] + g3[2],
    ]
}

/// `g . f`, each `g_k . f` formed over its common denominator.
pub fn dulac_dot_field(p: &Params, x: [f64; 3]) -> f64 {
    let [s, i, r] = x;
    let fx = proportions_rhs(p, x);
    let [f1, f2, f3] = eliminated_fields(p, x);
    let n1 = f1[1] * fx[2] - f1[2] * fx[1];
    let n2 = f2[2] * fx[0] - f2[0] * fx[2];
    let n3 = f3[0] * fx[1] - f3[1] * fx[0];
    n1 / (i * r) + n2 / (s * r) + n3 / (s * i)
}

/// Closed form of `(curl g) . (1, 1, 1)`.
pub fn curl_dot_ones(p: &Params, x: [f64; 3]) -> f64 {
    let [s, i, r] = x;
    -(p.b1 / (s * s * r) + (p.b2 + p.gamma) / (s * s * i) + (p.beta2 + p.alpha) / (s * r * r))
}

/// `(curl g) . (1, 1, 1)` by central differences with step `h`.
pub fn curl_dot_ones_fd(p: &Params, x: [f64; 3], h: f64) -> f64 {
    let partial = |axis: usize, comp: usize| {
        let mut hi = x;
        let mut lo = x;
        hi[axis] += h;
        lo[axis] -= h;
        (dulac_field(p, hi)[comp] - dulac_field(p, lo)[comp]) / (2.0 * h)
    };
    // (dz gy ... ) summed over the three curl components.
    (partial(1, 2) - partial(2, 1))
        + (partial(2, 0) - partial(0, 2))
        + (partial(0, 1) - partial(1, 0))
}

pub fn dulac_sample(p: &Params, x: &PropState) -> DulacSample {
    let a = x.to_array();
    let h = 3e-5 * a.iter().cloned().fold(f64::INFINITY, f64::min);
    DulacSample {
        point: *x,
        g_dot_f: dulac_dot_field(p, a),
        curl_dot_ones: curl_dot_ones(p, a),
        curl_dot_ones_fd: curl_dot_ones_fd(p, a, h),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DulacSummary {
    pub grid_n: usize,
    pub margin: f64,
    pub nodes: usize,
    pub max_abs_g_dot_f: f64,
    /// Largest (least negative) closed-form value over the grid.
    pub max_curl_dot_ones: f64,
    /// Largest `|fd - closed| / max(|closed|, 1)`.
    pub max_curl_rel_error: f64,
    /// Every numerator of the closed form vanishes, so the criterion says
    /// nothing.
    pub vacuous: bool,
    pub g_dot_f_ok: bool,
    pub curl_negative: bool,
    pub curl_fd_ok: bool,
    pub passed: bool,
}

/// Lattice spacing for grid nodes. On multiples of `2^-24` the sums
/// `s + i + r` are exact, so eliminating any one coordinate reproduces the
/// node bit for bit.
const GRID_SNAP: f64 = 1.0 / (1u64 << 24) as f64;

fn snap(x: f64) -> f64 {
    (x / GRID_SNAP).round() * GRID_SNAP
}

/// Barycentric grid of the simplex shrunk by `margin`: nodes
/// `margin + (1 - 3 margin) (a, b, c) / n` with `a + b + c = n`, snapped to
/// a dyadic lattice.
pub fn barycentric_grid(grid_n: usize, margin: f64) -> Vec<PropState> {
    let margin = (margin / GRID_SNAP).ceil() * GRID_SNAP;
    let span = 1.0 - 3.0 * margin;
    let n = grid_n as f64;
    let mut pts = Vec::with_capacity((grid_n + 1) * (grid_n + 2) / 2);
    for a in 0..=grid_n {
        for b in 0..=(grid_n - a) {
            let c = grid_n - a - b;
            let mut i = snap(margin + span * b as f64 / n);
            let mut r = snap(margin + span * c as f64 / n);
            while 1.0 - i - r < margin {
                if i > r {
                    i -= GRID_SNAP;
                } else {
                    r -= GRID_SNAP;
                }
            }
            let s = 1.0 - i - r;
            pts.push(PropState::new(s, i, r).expect("grid node lies in D"));
        }
    }
    pts
}

pub fn dulac_check(
    p: &Params,
    grid_n: usize,
    margin: f64,
) -> Result<DulacSummary, QualitativeError> {
    if margin.is_nan() || margin < MIN_MARGIN {
        return Err(QualitativeError::MarginTooSmall(margin));
    }
    if grid_n < 10 || margin >= 1.0 / 3.0 {
        return Err(QualitativeError::InvalidGrid);
    }
    let grid = barycentric_grid(grid_n, margin);
    if let Some(x) = grid
        .iter()
        .find(|x| x.to_array().iter().any(|&c| c < margin * (1.0 - 1e-12)))
    {
        let low = x.to_array().iter().cloned().fold(f64::INFINITY, f64::min);
        return Err(QualitativeError::MarginTooSmall(low));
    }
    let vacuous = p.b1 == 0.0 && p.b2 + p.gamma == 0.0 && p.beta2 + p.alpha == 0.0;
    let mut max_gf = 0.0f64;
    let mut max_curl = f64::NEG_INFINITY;
    let mut max_rel = 0.0f64;
    for x in &grid {
        let d = dulac_sample(p, x);
        max_gf = max_gf.max(d.g_dot_f.abs());
        max_curl = max_curl.max(d.curl_dot_ones);
        let rel = (d.curl_dot_ones_fd - d.curl_dot_ones).abs() / d.curl_dot_ones.abs().max(1.0);
        max_rel = max_rel.max(rel);
    }
    let g_dot_f_ok = max_gf <= G_DOT_F_TOL;
    let curl_negative = max_curl < 0.0;
    let curl_fd_ok = max_rel <= CURL_REL_TOL;
    Ok(DulacSummary {
        grid_n,
        margin,
        nodes: grid.len(),
        max_abs_g_dot_f: max_gf,
        max_curl_dot_ones: max_curl,
        max_curl_rel_error: max_rel,
        vacuous,
        g_dot_f_ok,
        curl_negative,
        curl_fd_ok,
        passed: g_dot_f_ok && curl_fd_ok && (vacuous || curl_negative),
    })
}

fn wrap(a: f64) -> f64 {
    let mut d = a % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    } else if d <= -PI {
        d += 2.0 * PI;
    }
    d
}

/// Rotation of the field along one segment, subdividing until adjacent
/// directions differ by at most `MAX_TURN`.
fn segment_turn(
    c: &PlanarCoefficients,
    a: [f64; 2],
    fa: [f64; 2],
    b: [f64; 2],
    fb: [f64; 2],
    depth: u32,
) -> Result<f64, QualitativeError> {
    let turn = wrap(fb[1].atan2(fb[0]) - fa[1].atan2(fa[0]));
    if turn.abs() <= MAX_TURN {
        return Ok(turn);
    }
    if depth >= MAX_DEPTH {
        return Err(QualitativeError::RefinementExhausted(a[0], a[1]));
    }
    let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let fm = field_checked(c, m)?;
    Ok(segment_turn(c, a, fa, m, fm, depth + 1)? + segment_turn(c, m, fm, b, fb, depth + 1)?)
}

fn field_checked(c: &PlanarCoefficients, x: [f64; 2]) -> Result<[f64; 2], QualitativeError> {
    let v = c.rhs(x);
    if v[0].abs().max(v[1].abs()) <= REST_EPS {
        return Err(QualitativeError::RestPointOnCurve(x[0], x[1]));
    }
    Ok(v)
}

/// Winding number of the planar field along a closed polyline in the
/// `(i, r)` plane (the last vertex connects back to the first).
pub fn winding_index(p: &Params, curve: &[[f64; 2]]) -> Result<i32, QualitativeError> {
    if curve.len() < 3 {
        return Err(QualitativeError::CurveTooShort);
    }
    let c = PlanarCoefficients::new(p);
    let fields = curve
        .iter()
        .map(|&x| field_checked(&c, x))
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = 0.0;
    for k in 0..curve.len() {
        let j = (k + 1) % curve.len();
        total += segment_turn(&c, curve[k], fields[k], curve[j], fields[j], 0)?;
    }
    let turns = total / (2.0 * PI);
    let index = turns.round();
    if (turns - index).abs() > 0.05 {
        return Err(QualitativeError::NonIntegralWinding(turns));
    }
    Ok(index as i32)
}

/// Counter-clockwise circle of `n` vertices.
pub fn circle(center: [f64; 2], radius: f64, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / n as f64;
            [center[0] + radius * th.cos(), center[1] + radius * th.sin()]
        })
        .collect()
}

/// Counter-clockwise ellipse around the segment `a`-`b`: semi-axis
/// `|b - a|/2 + pad` along the segment and `pad` across it.
pub fn capsule(a: [f64; 2], b: [f64; 2], pad: f64, n: usize) -> Vec<[f64; 2]> {
    let center = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len = dx.hypot(dy);
    let (ux, uy) = if len > 0.0 {
        (dx / len, dy / len)
    } else {
        (1.0, 0.0)
    };
    let major = 0.5 * len + pad;
    (0..n)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / n as f64;
            let (u, v) = (major * th.cos(), pad * th.sin());
            [center[0] + u * ux - v * uy, center[1] + u * uy + v * ux]
        })
        .collect()
}

/// Direction of the unstable eigenvector of the origin,
/// `(a + g, beta2 + alpha)` normalized.
pub fn unstable_direction(p: &Params) -> [f64; 2] {
    let rep = dfe_report(p);
    let v = [
        rep.eigenvalues[0].re - rep.eigenvalues[1].re,
        rep.jacobian[1][0],
    ];
    let n = v[0].hypot(v[1]);
    if n > 0.0 {
        [v[0] / n, v[1] / n]
    } else {
        [std::f64::consts::FRAC_1_SQRT_2; 2]
    }
}

/// Closed curve hugging the boundary of `D1` at distance `offset`, with a
/// notch of size `notch` cutting the origin off along its unstable
/// direction. Counter-clockwise, `per_edge` vertices per straight side.
pub fn boundary_curve(p: &Params, offset: f64, notch: f64, per_edge: usize) -> Vec<[f64; 2]> {
    let far = 1.0 - offset * (1.0 + std::f64::consts::SQRT_2);
    let u = unstable_direction(p);
    let tip = [notch * u[0], notch * u[1]];
    let corners = [
        [notch, offset],
        [far, offset],
        [offset, far],
        [offset, notch],
        tip,
    ];
    let mut pts = Vec::new();
    for k in 0..corners.len() {
        let a = corners[k];
        let b = corners[(k + 1) % corners.len()];
        for j in 0..per_edge {
            let t = j as f64 / per_edge as f64;
            pts.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    pts
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
    fn dot_product_forms_agree() {
        let p = p1();
        for x in [[0.5, 0.3, 0.2], [0.1, 0.1, 0.8], [0.02, 0.9, 0.08]] {
            let g = dulac_field(&p, x);
            let f = proportions_rhs(&p, x);
            let naive = g[0] * f[0] + g[1] * f[1] + g[2] * f[2];
            assert!((naive - dulac_dot_field(&p, x)).abs() < 1e-12);
            assert!(dulac_dot_field(&p, x).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_size_and_margin() {
        let g = barycentric_grid(10, 0.01);
        assert_eq!(g.len(), 66);
        assert!(g.iter().all(|x| x.to_array().iter().all(|&c| c >= 0.01)));
    }

    #[test]
    fn margin_and_grid_checks() {
        assert_eq!(
            dulac_check(&p1(), 50, 1e-4),
            Err(QualitativeError::MarginTooSmall(1e-4))
        );
        assert_eq!(
            dulac_check(&p1(), 5, 1e-3),
            Err(QualitativeError::InvalidGrid)
        );
    }

    #[test]
    fn p1_dulac_check_passes() {
        let s = dulac_check(&p1(), 50, 1e-3).unwrap();
        assert!(s.passed, "{s:?}");
        assert!(!s.vacuous);
    }

    #[test]
    fn vacuous_when_numerators_vanish() {
        let mut r = p1().rates();
        r.b1 = 0.0;
        r.b2 = 0.0;
        r.gamma = 0.0;
        r.beta2 = 0.0;
        r.alpha = 0.0;
        let p = r.validate().unwrap();
        let s = dulac_check(&p, 20, 0.01).unwrap();
        assert!(s.vacuous);
        assert_eq!(s.max_curl_dot_ones, 0.0);
        assert!(s.passed, "{s:?}");
    }

    #[test]
    fn winding_of_pure_rotation_and_saddle() {
        // Around the origin of P1 (R0 > 1) the field has a saddle.
        let p = p1();
        assert_eq!(
            winding_index(&p, &circle([0.0, 0.0], 0.01, 16)).unwrap(),
            -1
        );
    }

    #[test]
    fn curve_through_rest_point() {
        let p = p1();
        let curve = vec![[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]];
        assert!(matches!(
            winding_index(&p, &curve),
            Err(QualitativeError::RestPointOnCurve(..))
        ));
        assert_eq!(
            winding_index(&p, &curve[..2]),
            Err(QualitativeError::CurveTooShort)
        );
    }

    #[test]
    fn boundary_curve_stays_inside() {
        let c = boundary_curve(&p1(), 1e-3, 1e-2, 50);
        for x in &c {
            assert!(x[0] > 0.0 && x[1] > 0.0 && x[0] + x[1] < 1.0);
        }
    }
}
