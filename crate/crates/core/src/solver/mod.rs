//! Monotone iteration for `∂_t u − Δu = −|u|^{p−1}u` on excised,
//! symmetry-reduced space–time grids.

mod grid;
mod march;
mod sanity;
mod singular;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grid::{
    build_grid, build_grid_resolved, graded_nodes, outer_radius, AxisKind, CoordinateMode, ExcisedGrid, GridAxis,
    NodeRole,
};
pub use march::{
    iterate, monotone_sweep, node_lipschitz, GridSolution, Marcher, PairSamples, SemilinearProblem, Start,
    SweepRecord,
};
pub use sanity::{gaussian_sanity, ode_sanity, GaussianSanity, OdeSanity};
pub use singular::{
    discrete_offset, exhaustion_study, sample_potential, solve_singular, BoundaryLawReport, BoundaryLawRow,
    ExhaustionRow, ExhaustionTable, ShellSummary, SingularRun,
};

pub type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Reaction term `f(u)` of `∂_t u − Δu = f(u)`.
#[derive(Clone)]
pub enum Reaction {
    /// `f(u) = −|u|^{p−1}u`.
    Absorption { p: f64 },
    Zero,
    /// User hook with its derivative.
    Custom { f: Arc<ScalarFn>, df: Arc<ScalarFn> },
}

impl fmt::Debug for Reaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reaction::Absorption { p } => write!(f, "Absorption {{ p: {p} }}"),
            Reaction::Zero => write!(f, "Zero"),
            Reaction::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl Reaction {
    pub fn value(&self, u: f64) -> f64 {
        match self {
            Reaction::Absorption { p } => -u.abs().powf(p - 1.0) * u,
            Reaction::Zero => 0.0,
            Reaction::Custom { f, .. } => f(u),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            Reaction::Absorption { p } => -p * u.abs().powf(p - 1.0),
            Reaction::Zero => 0.0,
            Reaction::Custom { df, .. } => df(u),
        }
    }
}

/// Smallest `c ≥ 0` making `c·u + f(u)` nondecreasing on `[lo, hi]`.
pub fn lipschitz_const(f: &Reaction, lo: f64, hi: f64) -> f64 {
    match f {
        Reaction::Absorption { p } => p * lo.abs().max(hi.abs()).powf(p - 1.0),
        Reaction::Zero => 0.0,
        Reaction::Custom { df, .. } => {
            // dense sampling; hooks are assumed smooth on the bracket
            (0..=1024).map(|k| -df(lo + (hi - lo) * k as f64 / 1024.0)).fold(0.0, f64::max)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub mode: CoordinateMode,
    /// Exhaustion index `N` of single runs: `δ_exc = 1/N`.
    pub n_index: usize,
    pub n_ladder: Vec<usize>,
    /// Time horizon; runs use `min(N, horizon)`.
    pub horizon: f64,
    pub dt: f64,
    /// `κ` in the step law `h = κ · max(x, δ_exc)^{3/2}` at distance `x`
    /// from the singular set along each axis.
    pub spacing: f64,
    /// Largest ratio between neighbouring steps.
    pub growth: f64,
    pub tol: f64,
    pub max_sweeps: usize,
    /// Probe shells in units of `δ_exc`.
    pub shells: Vec<f64>,
    pub shell_points: usize,
    /// Reduced coordinates where the exhaustion study reports values.
    pub probes: Vec<Vec<f64>>,
    /// Solution snapshots are written every this many slices (and the last).
    pub snapshot_every: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            mode: CoordinateMode::Reduced2d,
            n_index: 16,
            n_ladder: vec![8, 16, 32],
            horizon: 1.0,
            dt: 0.02,
            spacing: 0.16,
            growth: 1.15,
            tol: 1e-10,
            max_sweeps: 20_000,
            shells: vec![2.0, 3.0],
            shell_points: 9,
            probes: vec![vec![1.5, 0.0], vec![1.0, 0.5], vec![0.5, 0.0], vec![2.0, 1.0], vec![1.25, 0.25]],
            snapshot_every: 25,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_index >= 1
            && self.horizon > 0.0
            && self.dt > 0.0
            && self.dt <= self.horizon
            && self.spacing > 0.0
            && self.spacing <= 1.0
            && self.growth >= 1.0
            && self.growth <= 2.0
            && self.tol > 0.0
            && self.max_sweeps > 0
            && self.shell_points > 0
            && self.snapshot_every > 0
            && self.shells.iter().all(|s| *s > 1.0)
            && self.n_ladder.iter().all(|n| *n >= 1);
        if !ok {
            return Err(Error::Config(format!("invalid solver settings {self:?}")));
        }
        Ok(())
    }
}
