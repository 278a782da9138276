use proptest::prelude::*;
use singheat::comparison::{critical_exponents, make_weak, ComparisonSolution, ExponentChoices};
use singheat::geometry::{MovingManifold, ParametricManifold};
use singheat::potential::QuadratureConfig;
use singheat::solver::*;
use singheat::Error;

fn circle(lower: f64) -> MovingManifold {
    MovingManifold::static_manifold(ParametricManifold::circle(4, 1.0).unwrap(), lower)
}

fn weak_pair() -> (ComparisonSolution, ComparisonSolution) {
    let ex = critical_exponents(4, 1, 2.0).unwrap();
    let (sup, sub) = make_weak(&ex, 1.0, 0.5, &ExponentChoices::default()).unwrap();
    (sup.with_a_tilde(0.5826), sub.with_a_tilde(0.5826))
}

/// Cheap grid: the discrete offset absorbs the coarse truncation error.
fn coarse() -> SolverSettings {
    SolverSettings { spacing: 0.4, growth: 1.3, horizon: 0.2, dt: 0.05, ..SolverSettings::default() }
}

fn uniform_box(len: f64, k: usize, slices: usize) -> ExcisedGrid {
    let nodes: Vec<f64> = (0..=k).map(|i| len * i as f64 / k as f64).collect();
    let axes = vec![
        GridAxis::new(AxisKind::Radial { group: 2 }, nodes.clone()).unwrap(),
        GridAxis::new(AxisKind::Radial { group: 2 }, nodes).unwrap(),
    ];
    let times = (0..slices).map(|s| 0.1 * s as f64).collect();
    ExcisedGrid::unexcised(CoordinateMode::Reduced2d, axes, 4, vec![0, 2], times).unwrap()
}

#[test]
fn constant_absorption_matches_the_ode() {
    let r = ode_sanity(2.0, 1.0, 5.0, 1e-3).unwrap();
    assert!(r.max_error < 1e-3, "{r:?}");
    // stiffer start (|u″(0)| ≈ 100): first-order error needs a smaller step
    let r = ode_sanity(3.0, 2.0, 5.0, 2.5e-4).unwrap();
    assert!(r.max_error < 1e-3, "{r:?}");
}

#[test]
fn heat_flow_converges_at_second_order() {
    // h halves and dt quarters: O(h²) + O(dt) errors drop by 4
    let runs: Vec<f64> = [(0.5, 0.04), (0.25, 0.01), (0.125, 0.0025)]
        .iter()
        .map(|&(h, dt)| gaussian_sanity(h, dt, 0.4).unwrap().max_error)
        .collect();
    for w in runs.windows(2) {
        let rate = w[0] / w[1];
        assert!((2.0..8.0).contains(&rate), "errors {runs:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn heat_flow_obeys_the_maximum_principle(seed in 0u64..1000, a in -2.0f64..0.0, w in 0.1f64..3.0) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let grid = uniform_box(2.0, 8, 4);
        let b = a + w;
        let n = grid.n_nodes();
        let boundary: Vec<Vec<f64>> =
            (0..grid.n_slices()).map(|_| (0..n).map(|_| rng.gen_range(a..b)).collect()).collect();
        let problem = SemilinearProblem {
            reaction: Reaction::Zero,
            initial: boundary[0].clone(),
            boundary,
            pair: None,
        };
        let sol = iterate(&problem, &grid, Start::Values(vec![vec![0.0; n]; grid.n_slices()]), 1e-14, 4).unwrap();
        for s in 0..grid.n_slices() {
            for i in 0..n {
                if grid.roles[s][i] == NodeRole::Interior {
                    let v = sol.values[s][i];
                    prop_assert!(v >= a - 1e-12 && v <= b + 1e-12);
                }
            }
        }
    }
}

#[test]
fn linear_problem_has_one_limit() {
    let grid = uniform_box(2.0, 8, 4);
    let n = grid.n_nodes();
    let data: Vec<Vec<f64>> = (0..grid.n_slices())
        .map(|s| (0..n).map(|i| 1.0 + 0.1 * s as f64 + (i % 7) as f64 * 0.05).collect())
        .collect();
    let problem = SemilinearProblem {
        reaction: Reaction::Zero,
        initial: data[0].clone(),
        boundary: data,
        pair: Some(PairSamples { lower: vec![vec![0.0; n]; 4], upper: vec![vec![3.0; n]; 4] }),
    };
    let lo = iterate(&problem, &grid, Start::Lower, 1e-12, 10).unwrap();
    let hi = iterate(&problem, &grid, Start::Upper, 1e-12, 10).unwrap();
    assert!(lo.converged && hi.converged);
    assert_eq!(lo.values, hi.values);
}

#[test]
fn exhaustion_grid_geometry() {
    let mm = circle(-2.0);
    let g = build_grid(&mm, &coarse(), 8).unwrap();
    assert_eq!(g.delta_exc, 0.125);
    assert_eq!(g.outer_radius, 8.0);
    assert_eq!(g.exhaustion_index, Some(8));
    assert!((g.times.last().unwrap() - 0.2).abs() < 1e-15);
    assert!((0..g.n_slices()).all(|s| g.interior_connected(s)));
    for s in 0..g.n_slices() {
        for i in 0..g.n_nodes() {
            let d = g.distance[s][i];
            match g.roles[s][i] {
                NodeRole::Interior => assert!(d > 0.125),
                NodeRole::Boundary => assert!(g.neighbors(i).iter().any(|&(j, _)| g.roles[s][j] == NodeRole::Interior)),
                NodeRole::Outside => {}
            }
        }
    }
    // the reduced distance agrees with the ambient nearest-point solver
    let c = vec![0.7, 0.4];
    let d = g.track_distance(&c, 0.1).unwrap();
    let exact = ((0.7f64 - 1.0).powi(2) + 0.16).sqrt();
    assert!((d - exact).abs() < 1e-12);
}

#[test]
fn interiors_are_nested_along_the_ladder() {
    let mm = circle(-2.0);
    let s = coarse();
    let g8 = build_grid_resolved(&mm, &s, 8, 16).unwrap();
    let g16 = build_grid_resolved(&mm, &s, 16, 16).unwrap();
    assert_eq!(g8.n_nodes(), g16.n_nodes());
    let mut strict = false;
    for sl in 0..g8.n_slices() {
        for i in 0..g8.n_nodes() {
            if g8.roles[sl][i] == NodeRole::Interior {
                assert_eq!(g16.roles[sl][i], NodeRole::Interior);
            } else if g16.roles[sl][i] == NodeRole::Interior {
                strict = true;
            }
        }
    }
    assert!(strict);
    assert!(build_grid_resolved(&mm, &s, 16, 8).is_err());
}

#[test]
fn symmetry_mismatch_is_a_config_error() {
    let off = ParametricManifold::circle(4, 1.0).unwrap().translated(&[0.5, 0.0, 0.0, 0.0]);
    let mm = MovingManifold::static_manifold(off, -2.0);
    assert!(matches!(build_grid(&mm, &coarse(), 8), Err(Error::Config(_))));
    let sphere = MovingManifold::static_manifold(ParametricManifold::sphere(5, 1.0).unwrap(), -2.0);
    assert!(build_grid(&sphere, &coarse(), 8).is_err());
}

#[test]
fn settings_are_validated() {
    assert!(SolverSettings { dt: 0.0, ..SolverSettings::default() }.validate().is_err());
    assert!(SolverSettings { spacing: 0.0, ..SolverSettings::default() }.validate().is_err());
    assert!(SolverSettings::default().validate().is_ok());
}

#[test]
fn weak_run_is_certified_and_bracketed() {
    let mm = circle(-2.0);
    let cfg = QuadratureConfig::default();
    let (sup, sub) = weak_pair();
    let settings = SolverSettings { n_index: 8, ..coarse() };
    let run = solve_singular(&mm, (&sup, &sub), &settings, &cfg).unwrap();
    assert!(run.a_tilde >= 0.5826);
    for sol in [&run.from_sub, &run.from_super, &run.super_data] {
        assert!(sol.converged);
        assert!(sol.max_monotone_violation() <= 1e-10 * sol.scale);
        assert!(sol.max_sandwich_violation() <= 1e-10 * sol.scale);
        assert!(sol.min_interior(&run.grid) >= -1e-10);
    }
    assert!(run.start_gap_band_ratio < 1.0);
    assert!(run.interior_connected);
    // sub-start iterates rise, super-start iterates fall
    let g = &run.grid;
    let probe = (0..g.n_nodes()).find(|&i| g.roles[1][i] == NodeRole::Interior).unwrap();
    assert!(run.lower[1][probe] <= run.from_sub.values[1][probe]);
    assert!(run.from_super.values[1][probe] <= run.upper[1][probe]);
    let report = &run.laws;
    assert_eq!(report.shells.len(), 2);
    assert!(report.rows.iter().all(|r| r.ratio_min <= r.ratio && r.ratio <= r.ratio_max));
}

#[test]
fn tighter_tolerance_moves_the_limit_by_less_than_tol() {
    let mm = circle(-2.0);
    let cfg = QuadratureConfig::default();
    let (sup, sub) = weak_pair();
    let grid = build_grid(&mm, &coarse(), 8).unwrap();
    let u = sample_potential(&mm, &[&grid], &cfg).unwrap();
    let a = discrete_offset(&grid, &u, (&sup, &sub), 0.5826, 1e6).unwrap();
    let eval = |sol: &ComparisonSolution, clamp: bool| -> Vec<Vec<f64>> {
        u.iter()
            .map(|s| s.iter().map(|&v| if v.is_finite() { let x = sol.value(v); if clamp { x.max(0.0) } else { x } } else { f64::NAN }).collect())
            .collect()
    };
    let lower = eval(&sub.with_a_tilde(a), true);
    let upper = eval(&sup.with_a_tilde(a), false);
    let initial: Vec<f64> = u[0].iter().map(|&v| if v.is_finite() { v } else { f64::NAN }).collect();
    let problem = SemilinearProblem {
        reaction: Reaction::Absorption { p: 2.0 },
        initial,
        boundary: lower.clone(),
        pair: Some(PairSamples { lower, upper }),
    };
    let tol = 1e-8;
    let coarse_sol = iterate(&problem, &grid, Start::Lower, tol, 20_000).unwrap();
    let fine_sol = iterate(&problem, &grid, Start::Lower, tol / 10.0, 20_000).unwrap();
    let last = grid.n_slices() - 1;
    for probe in [[1.5, 0.0], [1.0, 0.5], [0.5, 0.0], [2.0, 1.0]] {
        let a = grid.interpolate(&coarse_sol.values[last], &probe).unwrap();
        let b = grid.interpolate(&fine_sol.values[last], &probe).unwrap();
        assert!((a - b).abs() < tol * coarse_sol.scale, "{probe:?}: {a} vs {b}");
    }
}

#[test]
fn boundary_laws_do_not_depend_on_the_lower_time() {
    let cfg = QuadratureConfig::default();
    let (sup, sub) = weak_pair();
    let settings = SolverSettings { n_index: 8, ..coarse() };
    let means: Vec<f64> = [-2.0, -8.0]
        .iter()
        .map(|&lower| {
            let run = solve_singular(&circle(lower), (&sup, &sub), &settings, &cfg).unwrap();
            let sh = run.laws_super_data.shell(0.25).unwrap();
            0.5 * (sh.min + sh.max)
        })
        .collect();
    assert!((means[0] - means[1]).abs() < 0.05 * means[0], "{means:?}");
}

#[test]
fn exhaustion_sequence_is_ordered_and_cauchy() {
    let mm = circle(-2.0);
    let cfg = QuadratureConfig::default();
    let (sup, sub) = weak_pair();
    let settings = SolverSettings { spacing: 0.4, horizon: 0.5, ..SolverSettings::default() };
    let probes = vec![vec![1.5, 0.0], vec![1.0, 0.5], vec![0.5, 0.0], vec![2.0, 1.0], vec![1.25, 0.25]];
    let tab = exhaustion_study(&mm, (&sup, &sub), &settings, &[8, 16, 32], &probes, &cfg).unwrap();
    assert!(tab.lower_order_violation <= 1e-10 * tab.scale, "{}", tab.summary());
    assert!(tab.upper_order_violation <= 1e-10 * tab.scale, "{}", tab.summary());
    assert!(tab.cauchy[0] >= 2.0 * tab.cauchy[1], "{}", tab.summary());
    // sub-data values rise and super-data values fall with N
    for w in tab.rows.windows(2) {
        for k in 0..probes.len() {
            assert!(w[0].lower_values[k] <= w[1].lower_values[k] + 1e-10);
            assert!(w[1].upper_values[k] <= w[0].upper_values[k] + 1e-10);
        }
    }
    assert!(exhaustion_study(&mm, (&sup, &sub), &settings, &[8, 16], &probes, &cfg).is_err());
}
