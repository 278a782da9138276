use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use singheat::geometry::{
    distance, embedding_constant, shell_integral, surface_integral, AffineMotion, BoundsOptions, GeometryBounds,
    MotionFamily, MovingManifold, ParametricManifold, PlaneRotation, Profile, ShellResolution, SurfaceQuadrature,
};

fn unit_circle() -> MovingManifold {
    MovingManifold::static_manifold(ParametricManifold::circle(4, 1.0).unwrap(), -2.0)
}

fn drifting_circle() -> MovingManifold {
    let drift = AffineMotion::translation(vec![0.0, 0.0, 1.0, 0.0], Profile::SqrtDrift { offset: 4.0 });
    MovingManifold::new(ParametricManifold::circle(4, 1.0).unwrap(), MotionFamily::affine(4, drift, -2.0).unwrap()).unwrap()
}

fn bounds(mm: &MovingManifold) -> GeometryBounds {
    GeometryBounds::estimate(mm, &BoundsOptions::default()).unwrap()
}

#[test]
fn embedding_constant_of_the_unit_circle() {
    let c = ParametricManifold::circle(4, 1.0).unwrap();
    let k = embedding_constant(&c, 512).unwrap();
    assert!((k - PI / 2.0).abs() <= 1e-3, "{k}");
    // scale invariant, and never below one
    let k3 = embedding_constant(&ParametricManifold::circle(4, 3.0).unwrap(), 512).unwrap();
    assert!((k3 - k).abs() < 1e-9);
    for m in [ParametricManifold::sphere(5, 2.0).unwrap(), ParametricManifold::torus(5, 2.0, 0.5).unwrap()] {
        assert!(embedding_constant(&m, 64).unwrap() >= 1.0);
    }
}

#[test]
fn tube_volume_matches_monte_carlo() {
    let mm = unit_circle();
    let b = bounds(&mm);
    let delta = 0.9 * b.delta_tube;
    let r = shell_integral(&mm, 0.0, delta, 1e-12, 0.0, &b, &ShellResolution::default()).unwrap();

    // rejection sampling in the bounding box of the tube
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (hx, hz) = (1.0 + delta, delta);
    let samples = 10_000_000u64;
    let mut hits = 0u64;
    for _ in 0..samples {
        let x: f64 = rng.gen_range(-hx..hx);
        let y: f64 = rng.gen_range(-hx..hx);
        let z: f64 = rng.gen_range(-hz..hz);
        let w: f64 = rng.gen_range(-hz..hz);
        let rho = (x * x + y * y).sqrt() - 1.0;
        if rho * rho + z * z + w * w < delta * delta {
            hits += 1;
        }
    }
    let mc = hits as f64 / samples as f64 * (2.0 * hx).powi(2) * (2.0 * hz).powi(2);
    assert!((r.value / mc - 1.0).abs() < 0.02, "quadrature {} vs Monte Carlo {mc}", r.value);
    let weyl = 2.0 * PI * 4.0 * PI / 3.0 * delta.powi(3);
    assert!((r.value / weyl - 1.0).abs() < 1e-6);
}

#[test]
fn shell_integral_respects_its_bounds() {
    for mm in [unit_circle(), drifting_circle()] {
        let b = bounds(&mm);
        let s = (1.0 + b.alpha_l * b.alpha_l).sqrt();
        for t in [0.0, 1.0, 10.0] {
            for delta in [b.delta_tube, 0.5 * b.delta_tube, 0.1 * b.delta_tube] {
                let cap = delta / (b.b * b.b * s);
                for delta_p in [0.5 * cap, 0.1 * cap, 1e-3 * cap] {
                    for beta in [0.0, 1.0, -1.0, -2.0, -3.0, -4.0] {
                        let res = ShellResolution { surface: 32, radial_order: 12 };
                        let r = shell_integral(&mm, t, delta, delta_p, beta, &b, &res).unwrap();
                        assert!(
                            r.lower_bound <= r.value && r.value <= r.upper_bound,
                            "t={t} δ={delta} δ'={delta_p} β={beta}: {} not in [{}, {}]",
                            r.value,
                            r.lower_bound,
                            r.upper_bound
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn shell_integral_grows_logarithmically_at_the_critical_weight() {
    // codimension 3 = 2q with q = 3/2: weight d^{-3}
    let mm = unit_circle();
    let b = bounds(&mm);
    let delta = b.delta_tube;
    let res = ShellResolution::default();
    let v: Vec<f64> = (3..7)
        .map(|k| shell_integral(&mm, 0.0, delta, delta * 10f64.powi(-k), -3.0, &b, &res).unwrap().value)
        .collect();
    let steps: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    // each decade adds |S^2|·2π·ln 10 to leading order
    let decade = 4.0 * PI * 2.0 * PI * 10f64.ln();
    for s in &steps {
        assert!((s / decade - 1.0).abs() < 1e-3, "{s} vs {decade}");
    }
}

#[test]
fn nearest_points_are_unique_inside_the_tube() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for mm in [unit_circle(), drifting_circle()] {
        let b = bounds(&mm);
        for i in 0..500 {
            let t = [0.0, 0.5, 3.0, 20.0][i % 4];
            let shift = if mm.is_static() { 0.0 } else { (t + 4.0f64).sqrt() - 2.0 };
            let phi: f64 = rng.gen_range(0.0..2.0 * PI);
            let radial = [phi.cos(), phi.sin(), 0.0, 0.0];
            let g: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
            let gn = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            let d = b.delta_tube * rng.gen_range(0.01..0.999);
            let nu: Vec<f64> = (0..4)
                .map(|k| g[0] / gn * radial[k] + if k >= 2 { g[k - 1] / gn } else { 0.0 })
                .collect();
            let foot = [phi.cos(), phi.sin(), shift, 0.0];
            let x: Vec<f64> = (0..4).map(|k| foot[k] + d * nu[k]).collect();
            let r = distance(&mm, &x, t, Some(b.delta_tube)).unwrap();
            assert!(r.unique, "probe {i}");
            assert!((r.distance - d).abs() <= 1e-8, "probe {i}: {} vs {d}", r.distance);
            let fd: f64 = r.foot.iter().zip(&foot).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            assert!(fd <= 1e-8, "probe {i}: foot off by {fd}");
            if let Some(ru) = r.runner_up {
                assert!(ru > r.distance + 1e-8, "probe {i}: competing minimum at {ru}");
            }
        }
    }
}

#[test]
fn axis_points_are_not_unique() {
    let r = distance(&unit_circle(), &[0.0, 0.0, 0.3, 0.4], 0.0, None).unwrap();
    assert!((r.distance - (1.0f64 + 0.25).sqrt()).abs() < 1e-12);
    assert!(!r.unique);
}

#[test]
fn moving_length_stays_in_the_volume_bracket() {
    let c = ParametricManifold::circle(4, 1.0).unwrap();
    let motion = AffineMotion {
        scale: Profile::Sine { amplitude: 0.3, frequency: 1.0 },
        rotation: Some(PlaneRotation { plane: (0, 2), rate: 0.5 }),
        direction: vec![0.0, 0.0, 0.0, 1.0],
        shift: Profile::SqrtDrift { offset: 4.0 },
    };
    let mm = MovingManifold::new(c.clone(), MotionFamily::affine(4, motion, -2.0).unwrap()).unwrap();
    let b = bounds(&mm);
    let q = vec![SurfaceQuadrature::uniform(&c, 64).unwrap()];
    for t in [-1.5, 0.0, 0.7, 2.0, 5.0, 10.0, 50.0] {
        let len = surface_integral(&mm, t, &q, |_| 1.0).unwrap();
        assert!(len >= 2.0 * PI / b.b && len <= 2.0 * PI * b.b, "t={t}: {len}, B = {}", b.b);
        let exact = 2.0 * PI * (1.0 + 0.3 * t.sin());
        assert!((len / exact - 1.0).abs() < 1e-12);
    }
}
