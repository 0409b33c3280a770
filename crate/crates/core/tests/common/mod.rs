//! Test-only oracles. These deliberately avoid the library's planar
//! coefficients and solvers: fields are rebuilt from the absolute equations
//! and rest points are found by brute-force scanning and bisection.
#![allow(dead_code)]

use vtsirs::model::{Params, Rates};

pub fn p1_rates() -> Rates {
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
}

pub fn p1() -> Params {
    Params::new(p1_rates()).unwrap()
}

pub fn params_from(v: [f64; 11]) -> Params {
    let [b0, b1, beta1, beta2, b2, d, eps1, eps2, alpha, gamma, lambda] = v;
    Params::new(Rates {
        b0,
        b1,
        beta1,
        beta2,
        b2,
        d,
        eps1,
        eps2,
        alpha,
        gamma,
        lambda,
    })
    .unwrap()
}

/// Absolute right-hand side, term by term.
pub fn oracle_absolute(p: &Params, x: [f64; 3]) -> [f64; 3] {
    let [s, i, r] = x;
    let n = s + i + r;
    let incidence = p.lambda * i * s / n;
    [
        p.b0 * s - p.d * s + p.b1 * i + p.b2 * r + p.gamma * r - incidence,
        p.beta1 * i - p.d * i - p.eps1 * i - p.alpha * i + incidence,
        p.beta2 * i + p.alpha * i - p.d * r - p.eps2 * r - p.gamma * r,
    ]
}

/// Proportions field by the quotient rule `x' = X'/N - x N'/N` at `N = 1`.
pub fn oracle_proportions(p: &Params, x: [f64; 3]) -> [f64; 3] {
    let dx = oracle_absolute(p, x);
    let dn = dx[0] + dx[1] + dx[2];
    [dx[0] - x[0] * dn, dx[1] - x[1] * dn, dx[2] - x[2] * dn]
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Roots in `r` of `r' = 0` on the segment `{i fixed, 0 <= r <= 1 - i}`.
fn r_nullcline(p: &Params, i: f64, grid: usize) -> Vec<f64> {
    let f = |r: f64| oracle_proportions(p, [1.0 - i - r, i, r])[2];
    let top = 1.0 - i;
    let mut out = Vec::new();
    let mut prev = (0.0, f(0.0));
    for k in 1..=grid {
        let r = top * k as f64 / grid as f64;
        let fr = f(r);
        if prev.1 == 0.0 {
            out.push(prev.0);
        } else if (fr > 0.0) != (prev.1 > 0.0) && fr != 0.0 {
            out.push(bisect(f, prev.0, r));
        }
        prev = (r, fr);
    }
    out
}

/// Interior rest points `(s, i, r)` with `i, r > 0`, by a `grid x grid`
/// scan and nested bisection on the per-capita infective growth.
pub fn oracle_interior_rest_points(p: &Params, grid: usize) -> Vec<[f64; 3]> {
    let per_capita = |i: f64, r: f64| oracle_proportions(p, [1.0 - i - r, i, r])[1] / i;
    // Follow each branch of the r-nullcline; branches are indexed by order.
    let branch_value = |i: f64, k: usize| -> Option<f64> {
        let rs = r_nullcline(p, i, grid);
        rs.get(k).map(|&r| per_capita(i, r))
    };
    let mut found = Vec::new();
    for branch in 0..2 {
        let mut prev: Option<(f64, f64)> = None;
        for k in 1..grid {
            let i = k as f64 / grid as f64;
            let cur = branch_value(i, branch).map(|v| (i, v));
            if let (Some((i0, v0)), Some((i1, v1))) = (prev, cur) {
                if (v0 > 0.0) != (v1 > 0.0) {
                    let g = |i: f64| branch_value(i, branch).unwrap_or(f64::NAN);
                    let i_star = bisect(g, i0, i1);
                    let r_star = r_nullcline(p, i_star, grid)[branch];
                    if r_star > 0.0 && i_star + r_star < 1.0 {
                        found.push([1.0 - i_star - r_star, i_star, r_star]);
                    }
                }
            }
            prev = cur;
        }
    }
    found
}

/// Central-difference Jacobian of the planar reduction of the oracle field.
pub fn oracle_planar_jacobian(p: &Params, x: [f64; 2], h: f64) -> [[f64; 2]; 2] {
    let f = |i: f64, r: f64| {
        let v = oracle_proportions(p, [1.0 - i - r, i, r]);
        [v[1], v[2]]
    };
    let di_p = f(x[0] + h, x[1]);
    let di_m = f(x[0] - h, x[1]);
    let dr_p = f(x[0], x[1] + h);
    let dr_m = f(x[0], x[1] - h);
    [
        [
            (di_p[0] - di_m[0]) / (2.0 * h),
            (dr_p[0] - dr_m[0]) / (2.0 * h),
        ],
        [
            (di_p[1] - di_m[1]) / (2.0 * h),
            (dr_p[1] - dr_m[1]) / (2.0 * h),
        ],
    ]
}

pub fn max_abs_diff<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
