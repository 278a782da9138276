use proptest::prelude::*;
use singheat::comparison::{
    alpha_window, beta_prime_window, classify_initial_data, critical_exponents, gamma_window, initial_samples,
    make_strong, make_weak, residual, verify_signs, ExponentChoices, InitialClass, ProbePlan, WINDOW_MARGIN,
};
use singheat::geometry::{MovingManifold, ParametricManifold};
use singheat::potential::{eval_u, QuadratureConfig};
use singheat::Error;

fn unit_circle() -> MovingManifold {
    MovingManifold::static_manifold(ParametricManifold::circle(4, 1.0).unwrap(), -2.0)
}

fn small_plan(per_cell: usize) -> ProbePlan {
    ProbePlan { per_cell, fd_check: false, ..Default::default() }
}

#[test]
fn weak_pair_has_finite_minimal_offset() {
    let ex = critical_exponents(4, 1, 2.0).unwrap();
    let (sup, sub) = make_weak(&ex, 1.0, 0.0, &ExponentChoices::default()).unwrap();
    let plan = ProbePlan { per_cell: 40, ..Default::default() };
    let rep = verify_signs(&unit_circle(), -2.0, (&sup, &sub), 0.0, &plan, &QuadratureConfig::default(), 3).unwrap();
    let a = rep.a_tilde_min.expect("finite minimal offset");
    assert!(a > 0.0 && a < 1e3, "{a}");
    assert!(rep.sandwich_ok);
    assert!(rep.max_rel_gap < 1e-3, "{}", rep.max_rel_gap);
    for e in &rep.extrema {
        assert!(e.super_min >= 0.0 && e.sub_max <= 0.0);
    }
}

#[test]
fn weak_super_holds_for_any_offset() {
    let mm = unit_circle();
    let ex = critical_exponents(4, 1, 2.0).unwrap();
    let (sup, _) = make_weak(&ex, 1.0, 0.0, &ExponentChoices::default()).unwrap();
    let cfg = QuadratureConfig::default();
    for (x, _) in initial_samples(&mm, -2.0, 30, (0.01, 30.0), &cfg, 11).unwrap() {
        let ev = eval_u(&mm, -2.0, &x, 1.0, &cfg).unwrap();
        for a in [0.0, 1e-3, 1.0, 50.0] {
            let r = residual(&sup.with_a_tilde(a), &ev);
            let exact = (ev.value + a).powi(2);
            assert!(r > 0.0 && (r - exact).abs() <= 1e-12 * exact);
        }
    }
}

#[test]
fn minimal_offset_stable_under_probe_doubling() {
    let ex = critical_exponents(4, 1, 2.0).unwrap();
    let cfg = QuadratureConfig::default();
    for strong in [false, true] {
        let (sup, sub) = if strong {
            make_strong(&ex, 0.0, &ExponentChoices::default()).unwrap()
        } else {
            make_weak(&ex, 1.0, 0.0, &ExponentChoices::default()).unwrap()
        };
        let a1 = verify_signs(&unit_circle(), -2.0, (&sup, &sub), 0.0, &small_plan(25), &cfg, 5).unwrap();
        let a2 = verify_signs(&unit_circle(), -2.0, (&sup, &sub), 0.0, &small_plan(50), &cfg, 5).unwrap();
        let (a1, a2) = (a1.a_tilde_min.unwrap(), a2.a_tilde_min.unwrap());
        assert!((a2 - a1).abs() < 0.1 * a2, "strong={strong}: {a1} vs {a2}");
    }
}

fn boundary_ratios(mm: &MovingManifold, d: f64, t: f64, choices: &ExponentChoices) -> [f64; 4] {
    let ex = critical_exponents(4, 1, 2.0).unwrap();
    let (ws, wb) = make_weak(&ex, 1.0, 0.0, choices).unwrap();
    let (ss, sb) = make_strong(&ex, 0.0, choices).unwrap();
    let ev = eval_u(mm, -2.0, &[1.0 + d, 0.0, 0.0, 0.0], t, &QuadratureConfig::default()).unwrap();
    let l = ex.l.unwrap();
    [d * ws.value(ev.value), d * wb.value(ev.value), d * d * ss.value(ev.value) / l, d * d * sb.value(ev.value) / l]
}

#[test]
fn pairs_share_the_boundary_law() {
    let mm = unit_circle();
    // sub corrections d^{1−α} and d^{2−β′}/L stay below 5% at d = 0.01
    let tight = ExponentChoices { alpha: Some(0.25), beta_prime: Some(1.2), gamma: None };
    for t in [0.0, 10.0, 100.0] {
        let def = boundary_ratios(&mm, 0.01, t, &ExponentChoices::default());
        assert!((def[0] - 1.0).abs() < 0.05 && (def[2] - 1.0).abs() < 0.05, "{def:?}");
        for r in boundary_ratios(&mm, 0.01, t, &tight) {
            assert!((r - 1.0).abs() < 0.05, "t={t} {r}");
        }
    }
}

#[test]
fn default_sub_solutions_converge_at_their_correction_rate() {
    let mm = unit_circle();
    let coarse = boundary_ratios(&mm, 0.01, 1.0, &ExponentChoices::default());
    let fine = boundary_ratios(&mm, 0.0025, 1.0, &ExponentChoices::default());
    // the super/sub gaps at Ã = 1 are d^{1−α} + 2d and (d^{2−β′} + d^{2−γ} + 2d²)/L
    let gap = |r: [f64; 4], d: f64| [r[0] - r[1] - 2.0 * d, r[2] - r[3] - 2.0 * d * d / 2.0];
    let (g1, g2) = (gap(coarse, 0.01), gap(fine, 0.0025));
    for k in 0..2 {
        // both leading corrections scale like d^{1/2}: quartering d halves them
        let rate = g1[k] / g2[k];
        assert!((rate - 2.0).abs() < 0.2, "family {k}: {coarse:?} {fine:?}");
    }
}

#[test]
fn initial_data_classes() {
    let mm = unit_circle();
    let cfg = QuadratureConfig::default();
    let samples = initial_samples(&mm, -2.0, 40, (0.01, 20.0), &cfg, 1).unwrap();
    let lookup = |x: &[f64]| samples.iter().find(|(y, _)| y.as_slice() == x).unwrap().1;
    let x0 = InitialClass::Weak { c: 1.0, a: 0.0 };
    let m = classify_initial_data(lookup, &x0, &samples);
    assert!(m.member && m.measured_a == 0.0);
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let m = classify_initial_data(|x| lookup(x) + norm(x).sin(), &InitialClass::Weak { c: 1.0, a: 1.0 }, &samples);
    assert!(m.member && m.measured_a <= 1.0);
    let ex = critical_exponents(4, 1, 2.0).unwrap();
    let (l, beta) = (ex.l.unwrap(), ex.beta);
    let y0 = InitialClass::Strong { l, beta, a: 0.0 };
    let m = classify_initial_data(|x| l * lookup(x).powf(2.0 / ((4.0 - 1.0 - 2.0) * (2.0 - 1.0))), &y0, &samples);
    assert!(m.member, "{}", m.measured_a);
    let m = classify_initial_data(|x| 2.0 * lookup(x), &x0, &samples);
    assert!(!m.member);
}

#[test]
fn regime_gates() {
    let ex = critical_exponents(5, 1, 2.5).unwrap();
    assert!(matches!(make_strong(&ex, 0.0, &ExponentChoices::default()), Err(Error::Regime(_))));
    assert!(matches!(make_weak(&ex, 1.0, 0.0, &ExponentChoices::default()), Err(Error::Regime(_))));
    let ex = critical_exponents(4, 1, 2.0).unwrap();
    let bad = ExponentChoices { alpha: Some(1.0), ..Default::default() };
    assert!(matches!(make_weak(&ex, 1.0, 0.0, &bad), Err(Error::Regime(_))));
    assert!(matches!(critical_exponents(4, 2, 2.0), Err(Error::Regime(_))));
}

fn subcritical() -> impl Strategy<Value = (usize, usize, f64)> {
    (3usize..8, 0usize..3, 0.05f64..0.98).prop_map(|(big_n, m, s)| {
        let p_star = big_n as f64 / (big_n as f64 - 2.0);
        (big_n + m, m, 1.1f64.max(1.0 + s * (p_star - 1.0)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn default_exponents_sit_inside_their_windows((n, m, p) in subcritical()) {
        let ex = critical_exponents(n, m, p).unwrap();
        prop_assert!(ex.l.unwrap() > 0.0);
        prop_assert!(ex.beta > 1.0);
        let (_, sub) = make_weak(&ex, 1.0, 0.0, &ExponentChoices::default()).unwrap();
        let (lo, hi) = alpha_window(&ex);
        let alpha = sub.params[1];
        prop_assert!(alpha > lo + WINDOW_MARGIN && alpha < hi - WINDOW_MARGIN);
        if let Ok((sup, _)) = make_strong(&ex, 0.0, &ExponentChoices::default()) {
            let (bp, g) = (sup.params[2], sup.params[3]);
            let (blo, bhi) = beta_prime_window(&ex);
            prop_assert!(bp > blo + WINDOW_MARGIN && bp < bhi - WINDOW_MARGIN && bp > 0.0);
            let (glo, ghi) = gamma_window(&ex, bp);
            prop_assert!(g > glo + WINDOW_MARGIN && g < ghi - WINDOW_MARGIN);
        }
    }

    #[test]
    fn pairs_are_ordered(u in 1e-6f64..1e6, a in 0.0f64..100.0, (n, m, p) in subcritical()) {
        let ex = critical_exponents(n, m, p).unwrap();
        let (sup, sub) = make_weak(&ex, 1.5, 0.0, &ExponentChoices::default()).unwrap();
        prop_assert!(sub.with_a_tilde(a).value(u) <= sup.with_a_tilde(a).value(u));
        if let Ok((sup, sub)) = make_strong(&ex, 0.0, &ExponentChoices::default()) {
            let gap = sup.with_a_tilde(a).value(u) - sub.with_a_tilde(a).value(u);
            let (bp, g) = (sup.params[2], sup.params[3]);
            let expect = 2.0 * (u.powf(bp) + u.powf(g) + a);
            let size = sup.with_a_tilde(a).value(u).abs() + sub.with_a_tilde(a).value(u).abs();
            prop_assert!((gap - expect).abs() <= 1e-12 * size + 1e-9 * expect);
        }
    }

    #[test]
    fn residual_monotone_in_offset(u in 1e-4f64..1e4, g in 0.0f64..1e4, a in 0.0f64..50.0, da in 1e-6f64..10.0) {
        use nalgebra::{DMatrix, DVector};
        let ev = singheat::potential::PotentialEval {
            value: u,
            gradient: DVector::from_vec(vec![g, 0.0, 0.0, 0.0]),
            hessian: DMatrix::zeros(4, 4),
            dt: 0.0,
            quad_err: f64::NAN,
            distance: 1.0,
            foot: vec![],
        };
        let ex = critical_exponents(4, 1, 2.0).unwrap();
        let (ws, wb) = make_weak(&ex, 1.0, 0.0, &ExponentChoices::default()).unwrap();
        let (ss, sb) = make_strong(&ex, 0.0, &ExponentChoices::default()).unwrap();
        for sol in [ws, ss] {
            prop_assert!(residual(&sol.with_a_tilde(a + da), &ev) >= residual(&sol.with_a_tilde(a), &ev));
        }
        for sol in [wb, sb] {
            prop_assert!(residual(&sol.with_a_tilde(a + da), &ev) <= residual(&sol.with_a_tilde(a), &ev));
        }
    }
}
