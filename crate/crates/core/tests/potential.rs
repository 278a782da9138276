use std::time::Instant;

use singheat::geometry::{AffineMotion, MotionFamily, MovingManifold, ParametricManifold, Profile};
use singheat::potential::{eval_u, flat_plane_oracle, static_oracle, QuadratureConfig, TimeIntegration};
use statrs::function::erf::erfc;

fn flat_line() -> MovingManifold {
    MovingManifold::static_manifold(ParametricManifold::flat(4, 1).unwrap(), -1e9)
}

fn cfg(mode: TimeIntegration) -> QuadratureConfig {
    QuadratureConfig { time_integration: mode, ..Default::default() }
}

#[test]
fn flat_line_matches_erfc_closed_form() {
    let mm = flat_line();
    for mode in [TimeIntegration::Analytic, TimeIntegration::Panels] {
        for &d in &[0.1, 0.5, 2.0] {
            for &h in &[4.0, 100.0] {
                let x = [0.3, d * 0.6, d * 0.8, 0.0];
                let u = eval_u(&mm, -h, &x, 0.0, &cfg(mode)).unwrap();
                let exact = erfc(d / (2.0 * h.sqrt())) / d;
                let rel = (u.value / exact - 1.0).abs();
                assert!(rel < 1e-8, "{mode:?} d={d} h={h} rel={rel:e}");
                let o = flat_plane_oracle(d, 3, h).unwrap();
                assert!((o.u / exact - 1.0).abs() < 1e-9, "oracle {} vs {exact}", o.u);
                assert!((u.grad_norm() / o.grad_norm - 1.0).abs() < 1e-7, "grad {mode:?}");
            }
        }
    }
}

#[test]
fn static_circle_matches_newtonian_oracle() {
    let base = ParametricManifold::circle(4, 1.0).unwrap();
    let probes = [[2.0, 0.0, 0.0, 0.0], [1.1, 0.0, 0.05, 0.0], [0.0, 0.0, 0.0, 0.7], [0.3, 0.4, 0.5, 0.2]];
    let start = Instant::now();
    for x in &probes {
        for mode in [TimeIntegration::Analytic, TimeIntegration::Panels] {
            let mm = MovingManifold::static_manifold(base.clone(), -1e9);
            let u = eval_u(&mm, -100.0, x, 0.0, &cfg(mode)).unwrap();
            let o = static_oracle(&base, x, 100.0).unwrap();
            let rel = (u.value / o - 1.0).abs();
            assert!(rel <= 1e-10, "{x:?} {mode:?}: U = {} oracle = {o} rel = {rel:e}", u.value);
            assert!(u.heat_residual().abs() <= 1e-10 * (1.0 + u.laplacian().abs()));
        }
        // infinite horizon: the truncation at H = 1e8 is below 1e-8
        let mm = MovingManifold::static_manifold(base.clone(), -1e9);
        let u = eval_u(&mm, -1e8, x, 0.0, &QuadratureConfig::default()).unwrap();
        let o = static_oracle(&base, x, f64::INFINITY).unwrap();
        assert!((u.value / o - 1.0).abs() <= 1e-7, "{x:?}: {} vs {o}", u.value);
    }
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn moving_circle_near_field() {
    let drift = AffineMotion::translation(vec![0.0, 0.0, 1.0, 0.0], Profile::SqrtDrift { offset: 4.0 });
    let fam = MotionFamily::affine(4, drift, -4.0).unwrap();
    let mm = MovingManifold::new(ParametricManifold::circle(4, 1.0).unwrap(), fam).unwrap();
    let d = 0.01;
    let mut du = Vec::new();
    for &t in &[0.0, 1.0, 10.0, 100.0] {
        let c = mm.point(0, &[0.0], t);
        let x = [c[0] + d, c[1], c[2], c[3]];
        let u = eval_u(&mm, -2.0, &x, t, &QuadratureConfig::default()).unwrap();
        assert!((d * u.value - 1.0).abs() <= 0.05, "t={t}: dU = {}", d * u.value);
        assert!((d * d * u.grad_norm() - 1.0).abs() <= 0.1, "t={t}");
        assert!(u.heat_residual().abs() <= 1e-4 * (1.0 + u.laplacian().abs()));
        du.push(d * u.value);
    }
    let (lo, hi) = du.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    assert!((hi - lo) / hi < 0.05);
}
