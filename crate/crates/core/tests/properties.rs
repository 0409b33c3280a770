mod common;

use common::*;
use proptest::prelude::*;
use vtsirs::equilibrium::{all_rest_points, endemic_solve, EquilibriumError, Verdict};
use vtsirs::integrator::rk4_step;
use vtsirs::model::{
    field_absolute, field_planar, field_proportions, planar_rhs, population_growth_rate, AbsState,
    Params, PlanarState, PropState,
};
use vtsirs::qualitative::dulac_check;
use vtsirs::simulate::{
    integrate_planar, integrate_proportions, EventKind, IntegratorConfig, Method,
};
use vtsirs::thresholds::{
    basic_reproduction_number, classify, compute_thresholds, ProportionsLimit,
};
use vtsirs::ParamName;

fn rate() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 9 => 0.0..2.0f64]
}

fn params() -> impl Strategy<Value = Params> {
    proptest::array::uniform11(rate())
        .prop_filter("R0 denominator", |v| v[0] + v[6] + v[8] > 1e-3)
        .prop_map(params_from)
}

fn positive_params() -> impl Strategy<Value = Params> {
    proptest::array::uniform11(0.01..2.0f64).prop_map(params_from)
}

fn simplex_point() -> impl Strategy<Value = PropState> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(u, v)| {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        PropState::new(a, b - a, 1.0 - b).unwrap()
    })
}

fn planar_point() -> impl Strategy<Value = PlanarState> {
    simplex_point().prop_map(|x| x.project())
}

fn abs_sum(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn simplex_plane_is_invariant(p in params(), x in simplex_point()) {
        let f = field_proportions(&p, &x);
        prop_assert!((f[0] + f[1] + f[2]).abs() <= 1e-13 * (abs_sum(&f) + 1.0));
    }

    #[test]
    fn infective_free_side_is_invariant(p in params(), s in 0.0..1.0f64) {
        let x = PropState::new(s, 0.0, 1.0 - s).unwrap();
        prop_assert_eq!(field_proportions(&p, &x)[1], 0.0);
        prop_assert_eq!(field_planar(&p, &x.project())[0], 0.0);
    }

    #[test]
    fn planar_field_is_projected_proportions_field(p in params(), x in planar_point()) {
        let g = field_planar(&p, &x);
        let f = field_proportions(&p, &x.lift());
        prop_assert!((g[0] - f[1]).abs() <= 1e-13 * (f[1].abs() + 1.0));
        prop_assert!((g[1] - f[2]).abs() <= 1e-13 * (f[2].abs() + 1.0));
    }

    #[test]
    fn lift_then_project_is_identity(x in planar_point()) {
        prop_assert_eq!(x.lift().project(), x);
    }

    #[test]
    fn boundary_flows_inward(p in params(), u in 0.0..1.0f64) {
        let no_susceptibles = PropState::new(0.0, u, 1.0 - u).unwrap();
        prop_assert!(field_proportions(&p, &no_susceptibles)[0] >= 0.0);
        let no_removed = PropState::new(1.0 - u, u, 0.0).unwrap();
        prop_assert!(field_proportions(&p, &no_removed)[2] >= 0.0);
    }

    #[test]
    fn population_equation(p in params(), s in 0.0..100.0f64, i in 0.0..100.0f64, r in 0.0..100.0f64) {
        prop_assume!(s + i + r > 1e-3);
        let f = field_absolute(&p, &AbsState::new(s, i, r).unwrap()).unwrap();
        let n = s + i + r;
        let expected = p.b0 * s + (p.b1 + p.beta() - p.eps1) * i + (p.b2 - p.eps2) * r - p.d * n;
        let scale = abs_sum(&f) + abs_sum(&[p.b0 * s, p.b1 * i, p.b2 * r, p.d * n, p.lambda * i]) + 1.0;
        prop_assert!((f[0] + f[1] + f[2] - expected).abs() <= 1e-13 * scale);
        let rate = population_growth_rate(&p, [s / n, i / n, r / n]);
        prop_assert!((rate * n - expected).abs() <= 1e-12 * scale);
    }

    #[test]
    fn reproduction_number_falls_as_newborns_are_detected(p in positive_params(), shift in 0.01..1.0f64) {
        let beta = p.beta();
        let p2 = p.with(ParamName::Beta2, p.beta2 + shift * p.beta1).unwrap()
            .with(ParamName::Beta1, p.beta1 * (1.0 - shift)).unwrap();
        prop_assert!((p2.beta() - beta).abs() < 1e-12);
        prop_assert!(basic_reproduction_number(&p2) < basic_reproduction_number(&p));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn endemic_point_exists_exactly_above_threshold(p in params()) {
        let r0 = basic_reproduction_number(&p);
        prop_assume!((r0 - 1.0).abs() > 1e-6);
        match endemic_solve(&p) {
            Ok(Some(eq)) => {
                prop_assert!(r0 > 1.0);
                prop_assert!(eq.trace < 0.0);
                prop_assert!(eq.residual <= 1e-11);
                let x = eq.location;
                prop_assert!(x.i() > 0.0 && x.r() >= 0.0 && x.i() + x.r() <= 1.0);
            }
            Ok(None) => prop_assert!(r0 < 1.0),
            // Rest points can only reach the boundary when an edge stops
            // repelling: no inflow into R, into S, or no outflow from R.
            Err(EquilibriumError::BoundaryRoot { .. } | EquilibriumError::Degenerate)
                if p.beta2 + p.alpha == 0.0
                    || p.b1 + p.b2 + p.gamma == 0.0
                    || p.b0 + p.eps2 + p.gamma == 0.0 => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn rest_points_zero_the_field(p in params()) {
        if let Ok(pts) = all_rest_points(&p) {
            for x in pts {
                let f = planar_rhs(&p, x);
                let scale = 1.0 + x[0].abs() + x[1].abs();
                prop_assert!(f[0].abs().max(f[1].abs()) <= 1e-12 * scale * scale, "{x:?} -> {f:?}");
            }
        }
    }

    #[test]
    fn thresholds_agree_with_growth_rates(p in params()) {
        let Ok(eq) = endemic_solve(&p) else { return Ok(()) };
        let Ok(t) = compute_thresholds(&p, eq.as_ref()) else { return Ok(()) };
        if (t.r1 - 1.0).abs() > 1e-9 && t.growth_n.abs() > 1e-12 {
            prop_assert_eq!(t.growth_n > 0.0, t.r1 > 1.0);
        }
        if (t.r2 - 1.0).abs() > 1e-9 && t.growth_i.abs() > 1e-12 {
            prop_assert_eq!(t.growth_i > 0.0, t.r2 > 1.0);
        }
        if eq.is_some() {
            // At the endemic point I and N grow at the same rate.
            prop_assert!((t.growth_n - t.growth_i).abs() <= 1e-10 * (1.0 + t.growth_n.abs()));
            if (t.r1 - 1.0).abs() > 1e-9 && (t.r2 - 1.0).abs() > 1e-9 {
                prop_assert_eq!(t.r1 > 1.0, t.r2 > 1.0);
            }
        }
        let c = classify(&t);
        if let Some(row) = c.table_row {
            let endemic = c.proportions_limit == ProportionsLimit::Endemic;
            prop_assert_eq!(endemic, row == 2 || row == 5);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dulac_identities_hold(p in positive_params()) {
        let s = dulac_check(&p, 20, 1e-3).unwrap();
        prop_assert!(s.g_dot_f_ok, "max |g.f| = {}", s.max_abs_g_dot_f);
        prop_assert!(!s.vacuous && s.curl_negative);
        prop_assert!(s.curl_fd_ok, "relative error {}", s.max_curl_rel_error);
    }

    #[test]
    fn simplex_is_positively_invariant(p in params(), x in simplex_point()) {
        let cfg = IntegratorConfig { t_max: 1000.0, stop_on_convergence: false, ..Default::default() };
        let traj = integrate_proportions(&p, &x, &cfg).unwrap();
        prop_assert!(!traj.has_event(EventKind::LeftRegion));
        prop_assert!(traj.max_region_violation <= 1e-9);
        prop_assert_eq!(traj.final_time(), 1000.0);
    }

    #[test]
    fn planar_and_proportions_trajectories_agree(p in positive_params(), x in simplex_point()) {
        let cfg = IntegratorConfig {
            method: Method::Dopri45 { abs_tol: 1e-12, rel_tol: 1e-12 },
            t_max: 50.0,
            stop_on_convergence: false,
            ..Default::default()
        };
        let a = integrate_planar(&p, &x.project(), &cfg).unwrap();
        let b = integrate_proportions(&p, &x, &cfg).unwrap();
        prop_assert_eq!(a.times.len(), b.times.len());
        for (ya, yb) in a.states.iter().zip(&b.states) {
            prop_assert!((ya[0] - yb[1]).abs() < 1e-8 && (ya[1] - yb[2]).abs() < 1e-8);
        }
    }

    #[test]
    fn trajectory_limits_are_rest_points(p in positive_params(), x in simplex_point()) {
        let r0 = basic_reproduction_number(&p);
        prop_assume!((r0 - 1.0).abs() > 0.1);
        let traj = integrate_proportions(&p, &x, &IntegratorConfig::default()).unwrap();
        if traj.converged_at().is_some() {
            let f = vtsirs::model::proportions_rhs(&p, *traj.last());
            prop_assert!(abs_sum(&f) < 1e-7);
        }
    }
}

#[test]
fn rk4_converges_at_fourth_order() {
    let p = p1();
    let f = |y: &[f64; 2]| planar_rhs(&p, *y);
    let solve = |n: usize| {
        let h = 2.0 / n as f64;
        let mut y = [0.05, 0.4];
        for _ in 0..n {
            y = rk4_step(&f, &y, h);
        }
        y
    };
    let reference = solve(1 << 14);
    let err = |n: usize| {
        let y = solve(n);
        (y[0] - reference[0]).abs().max((y[1] - reference[1]).abs())
    };
    for n in [16, 32, 64] {
        let order = (err(n) / err(2 * n)).log2();
        assert!(order >= 3.5, "order {order} at n = {n}");
    }
}

#[test]
fn verdicts_above_threshold_are_attractors() {
    let p = p1();
    assert_eq!(
        endemic_solve(&p).unwrap().unwrap().verdict,
        Verdict::HyperbolicAttractor
    );
}
