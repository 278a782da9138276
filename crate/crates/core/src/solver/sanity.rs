use serde::Serialize;

use super::grid::{AxisKind, CoordinateMode, ExcisedGrid, GridAxis, NodeRole};
use super::march::{iterate, SemilinearProblem, Start};
use super::Reaction;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeSanity {
    pub p: f64,
    pub u_star: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Max over slices and interior nodes of `|u − u_exact(t)|`.
    pub max_error: f64,
    pub sweeps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianSanity {
    pub h: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Max interior error at the final slice.
    pub max_error: f64,
}

fn uniform(len: f64, h: f64) -> Vec<f64> {
    let k = (len / h).round().max(2.0) as usize;
    (0..=k).map(|i| len * i as f64 / k as f64).collect()
}

fn reduced_box(len: f64, h: f64, times: Vec<f64>) -> Result<ExcisedGrid> {
    let axes = vec![
        GridAxis::new(AxisKind::Radial { group: 2 }, uniform(len, h))?,
        GridAxis::new(AxisKind::Radial { group: 2 }, uniform(len, h))?,
    ];
    ExcisedGrid::unexcised(CoordinateMode::Reduced2d, axes, 4, vec![0, 2], times)
}

fn time_grid(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(t_end > 0.0 && dt > 0.0 && dt <= t_end) {
        return Err(Error::Config("sanity runs need 0 < dt <= t_end".into()));
    }
    let k = (t_end / dt).round() as usize;
    Ok((0..=k).map(|i| t_end * i as f64 / k as f64).collect())
}

/// Spatially constant data without excision against
/// `u(t) = (u*^{1−p} + (p−1)t)^{1/(1−p)}`.
pub fn ode_sanity(p: f64, u_star: f64, t_end: f64, dt: f64) -> Result<OdeSanity> {
    if !(p > 1.0 && u_star > 0.0) {
        return Err(Error::Config("ODE sanity needs p > 1 and u* > 0".into()));
    }
    let grid = reduced_box(1.0, 0.25, time_grid(t_end, dt)?)?;
    let exact = |t: f64| (u_star.powf(1.0 - p) + (p - 1.0) * t).powf(1.0 / (1.0 - p));
    let n = grid.n_nodes();
    let boundary: Vec<Vec<f64>> = grid.times.iter().map(|&t| vec![exact(t); n]).collect();
    let problem = SemilinearProblem {
        reaction: Reaction::Absorption { p },
        initial: vec![u_star; n],
        boundary,
        pair: None,
    };
    let start = vec![vec![u_star; n]; grid.n_slices()];
    let sol = iterate(&problem, &grid, Start::Values(start), 1e-13, 10_000)?;
    if !sol.converged {
        return Err(Error::Convergence("ODE sanity iteration did not converge".into()));
    }
    let mut max_error: f64 = 0.0;
    for (s, &t) in grid.times.iter().enumerate() {
        for i in 0..n {
            if grid.roles[s][i] == NodeRole::Interior {
                max_error = max_error.max((sol.values[s][i] - exact(t)).abs());
            }
        }
    }
    Ok(OdeSanity { p, u_star, dt, t_end, max_error, sweeps: sol.sweeps() })
}

/// Pure heat flow of `e^{−|x|²/4s₀}` in `R^4` (double-radial coordinates)
/// against `(s₀/(s₀+t))² e^{−|x|²/4(s₀+t)}`.
pub fn gaussian_sanity(h: f64, dt: f64, t_end: f64) -> Result<GaussianSanity> {
    let s0 = 0.25;
    let grid = reduced_box(6.0, h, time_grid(t_end, dt)?)?;
    let exact = |x: &[f64], t: f64| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (s0 / (s0 + t)).powi(2) * (-r2 / (4.0 * (s0 + t))).exp()
    };
    let n = grid.n_nodes();
    let pts: Vec<Vec<f64>> = (0..n).map(|i| grid.ambient_point(i)).collect();
    let boundary: Vec<Vec<f64>> = grid.times.iter().map(|&t| pts.iter().map(|x| exact(x, t)).collect()).collect();
    let problem = SemilinearProblem { reaction: Reaction::Zero, initial: boundary[0].clone(), boundary, pair: None };
    let start = vec![vec![0.0; n]; grid.n_slices()];
    let sol = iterate(&problem, &grid, Start::Values(start), 1e-14, 4)?;
    let last = grid.n_slices() - 1;
    let max_error = (0..n)
        .filter(|&i| grid.roles[last][i] == NodeRole::Interior)
        .map(|i| (sol.values[last][i] - exact(&pts[i], t_end)).abs())
        .fold(0.0, f64::max);
    Ok(GaussianSanity { h, dt, t_end, max_error })
}
