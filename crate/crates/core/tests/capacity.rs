use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use singheat::capacity::{capacity_scan_multi, cutoff_eval, q_from_p, CapacityPlan, CutoffProfile, TubeGrid, Verdict};
use singheat::geometry::{MovingManifold, ParametricManifold};
use singheat::potential::{PotentialEval, QuadratureConfig};

/// Exact `U = |y|^{−(N−2)}` for the flat plane `y = 0` in `R^n`, `y` the first `N` coordinates.
fn flat_eval(x: &[f64], codim: usize) -> PotentialEval {
    let n = x.len();
    let nf = codim as f64;
    let r2: f64 = x[..codim].iter().map(|v| v * v).sum();
    let r = r2.sqrt();
    let u = r.powf(2.0 - nf);
    let mut g = DVector::zeros(n);
    let mut h = DMatrix::zeros(n, n);
    for i in 0..codim {
        g[i] = (2.0 - nf) * u * x[i] / r2;
        for j in 0..codim {
            let delta = if i == j { 1.0 } else { 0.0 };
            h[(i, j)] = (2.0 - nf) * u / r2 * (delta - nf * x[i] * x[j] / r2);
        }
    }
    let mut foot = x.to_vec();
    foot[..codim].iter_mut().for_each(|v| *v = 0.0);
    PotentialEval { value: u, gradient: g, hessian: h, dt: 0.0, quad_err: f64::NAN, distance: r, foot }
}

#[test]
fn flat_plane_cutoff_derivatives_match_differences() {
    let profile = CutoffProfile::default();
    let (codim, eps, t) = (3, 0.05, 0.5);
    let dir = [0.6, -0.48, 0.64];
    // transition annulus ε² < d < ε
    for &d in &[0.004, 0.01, 0.03] {
        let x: Vec<f64> = dir.iter().map(|v| v * d).chain([0.3]).collect();
        let cv = cutoff_eval(eps, codim, &profile, &flat_eval(&x, codim), t).unwrap();
        assert!(cv.grad.norm() > 0.0);
        for i in 0..4 {
            let h = 1e-5 * d;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fp = cutoff_eval(eps, codim, &profile, &flat_eval(&xp, codim), t).unwrap();
            let fm = cutoff_eval(eps, codim, &profile, &flat_eval(&xm, codim), t).unwrap();
            let fd = (fp.f - fm.f) / (2.0 * h);
            let scale = cv.grad.norm();
            assert!((fd - cv.grad[i]).abs() <= 1e-3 * scale, "d = {d}, i = {i}: {fd} vs {}", cv.grad[i]);
            for j in 0..4 {
                let hd = (fp.grad[j] - fm.grad[j]) / (2.0 * h);
                assert!((hd - cv.hess[(i, j)]).abs() <= 1e-3 * cv.hess.norm(), "hessian ({i},{j}) at d = {d}");
            }
        }
    }
}

#[test]
fn cutoff_support_on_flat_plane() {
    let profile = CutoffProfile::default();
    let eps = 0.05;
    for &t in &[-1.2, 0.0, 1.5, 2.2] {
        let (eta, _) = profile.eta(t);
        let inner = cutoff_eval(eps, 3, &profile, &flat_eval(&[eps * eps * 0.9, 0.0, 0.0, 0.0], 3), t).unwrap();
        assert_eq!(inner.f, eta);
        assert_eq!(inner.hess.norm(), 0.0);
        assert_eq!(inner.grad.norm(), 0.0);
        let outer = cutoff_eval(eps, 3, &profile, &flat_eval(&[eps * 1.1, 0.0, 0.0, 0.0], 3), t).unwrap();
        assert_eq!(outer.f, 0.0);
        assert_eq!(outer.dt, 0.0);
    }
    assert!(cutoff_eval(0.5, 3, &profile, &flat_eval(&[0.1, 0.0, 0.0, 0.0], 3), 0.0).is_err());
}

#[test]
fn coarse_scan_separates_the_regimes() {
    let mm = MovingManifold::static_manifold(ParametricManifold::circle(4, 1.0).unwrap(), -1.75);
    let plan = CapacityPlan {
        eps: (3..=6).map(|k| 2f64.powi(-k)).collect(),
        grid: TubeGrid { surface: 6, per_octave: 6, time_order: 4 },
        ..CapacityPlan::default()
    };
    let out = capacity_scan_multi(&mm, &[4.0, 2.0], &plan, &QuadratureConfig::default(), 3).unwrap();
    assert_eq!(out[0].verdict, Verdict::Decaying);
    assert_eq!(out[1].verdict, Verdict::Diverging);
    for prof in &out {
        assert_eq!(prof.support_violations, 0);
        assert!(prof.skipped.is_empty());
        for r in &prof.rows {
            for v in [r.comp_f, r.comp_grad, r.comp_hess, r.comp_dt] {
                assert!(v >= 0.0 && v.is_finite());
            }
        }
        assert!(prof.radial_sensitivity < 0.05, "{}", prof.summary());
    }
    // C₀ ≥ 1.5 since the two-sided constant is at least 1
    assert!(out[0].constants.c0 >= 1.5 && out[0].constants.delta > 0.1);
}

#[test]
fn inadmissible_eps_are_skipped() {
    let mm = MovingManifold::static_manifold(ParametricManifold::circle(4, 1.0).unwrap(), -1.75);
    let plan = CapacityPlan {
        eps: vec![0.4, 0.25, 2f64.powi(-3), 2f64.powi(-4)],
        grid: TubeGrid { surface: 4, per_octave: 4, time_order: 2 },
        ..CapacityPlan::default()
    };
    let prof = &capacity_scan_multi(&mm, &[4.0], &plan, &QuadratureConfig::default(), 3).unwrap()[0];
    assert_eq!(prof.skipped, vec![0.4, 0.25]);
    assert_eq!(prof.rows.len(), 2);
    assert!(prof.warnings.iter().any(|w| w.contains("eps = 0.4")));
}

#[test]
fn conjugate_regimes() {
    assert!(q_from_p(4.0, 3).unwrap().removable_range);
    assert!(q_from_p(3.0, 3).unwrap().removable_range);
    assert!(!q_from_p(2.0, 3).unwrap().removable_range);
}

proptest! {
    #[test]
    fn cutoff_stays_in_unit_interval(
        d in 1e-5f64..0.5, t in -2.0f64..3.5, k in 2u32..9, a in 0.0f64..6.283,
    ) {
        let profile = CutoffProfile::default();
        let eps = 2f64.powi(-(k as i32));
        let x = [d * a.cos(), d * a.sin(), 0.0, 0.7];
        let cv = cutoff_eval(eps, 3, &profile, &flat_eval(&x, 3), t).unwrap();
        prop_assert!((0.0..=1.0).contains(&cv.f));
        prop_assert!(cv.f <= profile.eta(t).0 + 1e-15);
    }
}
