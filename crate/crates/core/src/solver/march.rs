use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use serde::Serialize;

use super::grid::{ExcisedGrid, NodeRole};
use super::{lipschitz_const, Reaction};
use crate::error::{Error, Result};

/// Comparison pair sampled at the active nodes of every slice.
#[derive(Debug, Clone)]
pub struct PairSamples {
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
}

/// `∂_t u − Δu = f(u)` on an excised grid with Dirichlet data on the
/// excision surface and outer boundary.
#[derive(Clone)]
pub struct SemilinearProblem {
    pub reaction: Reaction,
    /// Slice-0 values at every active node.
    pub initial: Vec<f64>,
    /// Dirichlet values per slice; also enters nodes that become interior.
    pub boundary: Vec<Vec<f64>>,
    pub pair: Option<PairSamples>,
}

impl SemilinearProblem {
    fn check(&self, grid: &ExcisedGrid) -> Result<()> {
        let n = grid.n_nodes();
        let bad = self.initial.len() != n
            || self.boundary.len() != grid.n_slices()
            || self.boundary.iter().any(|b| b.len() != n)
            || self.pair.as_ref().is_some_and(|p| p.lower.len() != grid.n_slices() || p.upper.len() != grid.n_slices());
        if bad {
            return Err(Error::Internal("problem data does not match the grid".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum Start {
    /// Sub-solution samples; iterates are nondecreasing.
    Lower,
    /// Super-solution samples; iterates are nonincreasing.
    Upper,
    Values(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRecord {
    pub sweep: usize,
    /// `max |u_{k+1} − u_k|` over interior nodes.
    pub increment: f64,
    /// Largest step against the start's monotone direction.
    pub monotone_violation: f64,
    /// Largest excursion outside the comparison pair.
    pub sandwich_violation: f64,
}

#[derive(Debug, Clone)]
pub struct GridSolution {
    /// Values per slice per node; `NaN` at outside nodes.
    pub values: Vec<Vec<f64>>,
    pub log: Vec<SweepRecord>,
    pub converged: bool,
    /// `max |u|` over the data, the unit of `tol`.
    pub scale: f64,
    pub tol: f64,
}

impl GridSolution {
    pub fn sweeps(&self) -> usize {
        self.log.len()
    }

    pub fn max_monotone_violation(&self) -> f64 {
        self.log.iter().map(|r| r.monotone_violation).fold(0.0, f64::max)
    }

    pub fn max_sandwich_violation(&self) -> f64 {
        self.log.iter().map(|r| r.sandwich_violation).fold(0.0, f64::max)
    }

    /// Minimum over interior values of all slices.
    pub fn min_interior(&self, grid: &ExcisedGrid) -> f64 {
        let mut m = f64::INFINITY;
        for (s, vals) in self.values.iter().enumerate() {
            for (v, r) in vals.iter().zip(&grid.roles[s]) {
                if *r == NodeRole::Interior {
                    m = m.min(*v);
                }
            }
        }
        m
    }

    pub fn iteration_log(&self) -> String {
        let mut s = String::from("sweep,increment,monotone_violation,sandwich_violation\n");
        for r in &self.log {
            s += &format!(
                "{},{:.6e},{:.6e},{:.6e}\n",
                r.sweep, r.increment, r.monotone_violation, r.sandwich_violation
            );
        }
        s
    }
}

struct SliceOperator {
    interior: Vec<usize>,
    /// Position in `interior`, `u32::MAX` elsewhere.
    local: Vec<u32>,
    chol: CscCholesky<f64>,
}

/// Backward-Euler stepper for `(u_n − u_{n−1})/Δt − Δu_n + c u_n = rhs_n` with
/// node-local `c`, factored once per distinct slice geometry.
pub struct Marcher<'a> {
    grid: &'a ExcisedGrid,
    c: Vec<f64>,
    measure: Vec<f64>,
    slice_op: Vec<usize>,
    ops: Vec<SliceOperator>,
}

impl<'a> Marcher<'a> {
    pub fn new(grid: &'a ExcisedGrid, c: Vec<f64>) -> Result<Self> {
        let n = grid.n_nodes();
        if c.len() != n {
            return Err(Error::Internal("Lipschitz vector does not match the grid".into()));
        }
        let measure: Vec<f64> = (0..n).map(|i| grid.measure(i)).collect();
        let dt = grid.dt();
        let mut ops: Vec<SliceOperator> = Vec::new();
        let mut slice_op = vec![usize::MAX; grid.n_slices()];
        let mut owner: Vec<usize> = Vec::new();
        for s in 1..grid.n_slices() {
            if let Some(k) = owner.iter().position(|&o| grid.roles[o] == grid.roles[s]) {
                slice_op[s] = k;
                continue;
            }
            let roles = &grid.roles[s];
            let interior: Vec<usize> = (0..n).filter(|&i| roles[i] == NodeRole::Interior).collect();
            if interior.is_empty() {
                return Err(Error::Config(format!("slice {s} has no interior nodes")));
            }
            let mut local = vec![u32::MAX; n];
            for (k, &i) in interior.iter().enumerate() {
                local[i] = k as u32;
            }
            let m = interior.len();
            let mut coo = CooMatrix::new(m, m);
            for (k, &i) in interior.iter().enumerate() {
                let mut diag = measure[i] * (1.0 / dt + c[i]);
                for (j, w) in grid.neighbors(i) {
                    diag += w;
                    if local[j] != u32::MAX {
                        coo.push(k, local[j] as usize, -w);
                    }
                }
                coo.push(k, k, diag);
            }
            let chol = CscCholesky::factor(&CscMatrix::from(&coo))
                .map_err(|e| Error::Convergence(format!("slice {s}: Cholesky factorization failed: {e:?}")))?;
            slice_op[s] = ops.len();
            owner.push(s);
            ops.push(SliceOperator { interior, local, chol });
        }
        Ok(Marcher { grid, c, measure, slice_op, ops })
    }

    pub fn factorizations(&self) -> usize {
        self.ops.len()
    }

    /// One application of `u ↦ (∂_t − Δ + c)^{−1}(c u + f(u))` with the
    /// problem's initial and boundary data.
    pub fn sweep(&self, prev: &[Vec<f64>], problem: &SemilinearProblem) -> Result<Vec<Vec<f64>>> {
        let grid = self.grid;
        let dt = grid.dt();
        let n = grid.n_nodes();
        let mut out = Vec::with_capacity(grid.n_slices());
        let first: Vec<f64> = (0..n)
            .map(|i| if grid.roles[0][i] == NodeRole::Outside { f64::NAN } else { problem.initial[i] })
            .collect();
        out.push(first);
        for s in 1..grid.n_slices() {
            let op = &self.ops[self.slice_op[s]];
            let roles = &grid.roles[s];
            let bc = &problem.boundary[s];
            let earlier = &out[s - 1];
            let mut rhs = DMatrix::zeros(op.interior.len(), 1);
            for (k, &i) in op.interior.iter().enumerate() {
                let u = prev[s][i];
                // a node entering the interior starts from the boundary source
                let before = if earlier[i].is_finite() { earlier[i] } else { bc[i] };
                let mut r = self.measure[i] * (before / dt + self.c[i] * u + problem.reaction.value(u));
                for (j, w) in grid.neighbors(i) {
                    if op.local[j] == u32::MAX {
                        r += w * bc[j];
                    }
                }
                rhs[(k, 0)] = r;
            }
            op.chol.solve_mut(&mut rhs);
            let mut slice = vec![f64::NAN; n];
            for i in 0..n {
                if roles[i] == NodeRole::Boundary {
                    slice[i] = bc[i];
                }
            }
            for (k, &i) in op.interior.iter().enumerate() {
                let v = rhs[(k, 0)];
                if !v.is_finite() {
                    return Err(Error::Convergence(format!("linear solve at slice {s} produced {v}")));
                }
                slice[i] = v;
            }
            out.push(slice);
        }
        Ok(out)
    }
}

/// Node-local `c_i = max_n c_lip(f, [u̲_n(i), ū_n(i)])`, or one global value
/// over `bracket` without a pair.
pub fn node_lipschitz(grid: &ExcisedGrid, problem: &SemilinearProblem, bracket: (f64, f64)) -> Vec<f64> {
    let n = grid.n_nodes();
    match &problem.pair {
        Some(pair) => (0..n)
            .map(|i| {
                let mut c: f64 = 0.0;
                for s in 0..grid.n_slices() {
                    let (lo, hi) = (pair.lower[s][i], pair.upper[s][i]);
                    if lo.is_finite() && hi.is_finite() {
                        c = c.max(lipschitz_const(&problem.reaction, lo.min(hi), hi.max(lo)));
                    }
                }
                c
            })
            .collect(),
        None => vec![lipschitz_const(&problem.reaction, bracket.0, bracket.1); n],
    }
}

/// One sweep with a freshly factored operator.
pub fn monotone_sweep(
    prev: &[Vec<f64>],
    problem: &SemilinearProblem,
    grid: &ExcisedGrid,
    c_lip: Vec<f64>,
) -> Result<Vec<Vec<f64>>> {
    problem.check(grid)?;
    Marcher::new(grid, c_lip)?.sweep(prev, problem)
}

fn data_range<'v>(values: impl Iterator<Item = &'v f64>) -> (f64, f64) {
    values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Monotone iteration to a fixed point: stops once the sup increment is
/// below `tol · max(1, scale)`.
pub fn iterate(
    problem: &SemilinearProblem,
    grid: &ExcisedGrid,
    start: Start,
    tol: f64,
    max_sweeps: usize,
) -> Result<GridSolution> {
    problem.check(grid)?;
    if !(tol > 0.0) || max_sweeps == 0 {
        return Err(Error::Config("iteration needs tol > 0 and max_sweeps > 0".into()));
    }
    let (mut u, direction) = match start {
        Start::Lower => (problem.pair.as_ref().ok_or_else(no_pair)?.lower.clone(), 1.0),
        Start::Upper => (problem.pair.as_ref().ok_or_else(no_pair)?.upper.clone(), -1.0),
        Start::Values(v) => {
            if v.len() != grid.n_slices() || v.iter().any(|s| s.len() != grid.n_nodes()) {
                return Err(Error::Internal("start values do not match the grid".into()));
            }
            (v, 0.0)
        }
    };
    let bracket = {
        let all = problem.initial.iter().chain(problem.boundary.iter().flatten()).chain(u.iter().flatten());
        let (lo, hi) = data_range(all);
        match &problem.pair {
            Some(p) => {
                let (a, _) = data_range(p.lower.iter().flatten());
                let (_, b) = data_range(p.upper.iter().flatten());
                (lo.min(a), hi.max(b))
            }
            None => (lo, hi),
        }
    };
    let scale = bracket.0.abs().max(bracket.1.abs()).max(1.0);
    let marcher = Marcher::new(grid, node_lipschitz(grid, problem, bracket))?;
    let mut log = Vec::new();
    let mut converged = false;
    for sweep in 1..=max_sweeps {
        let next = marcher.sweep(&u, problem)?;
        let mut rec = SweepRecord { sweep, increment: 0.0, monotone_violation: 0.0, sandwich_violation: 0.0 };
        for s in 0..grid.n_slices() {
            for i in 0..grid.n_nodes() {
                if grid.roles[s][i] != NodeRole::Interior {
                    continue;
                }
                let step = next[s][i] - u[s][i];
                rec.increment = rec.increment.max(step.abs());
                if direction != 0.0 {
                    rec.monotone_violation = rec.monotone_violation.max(-direction * step);
                }
                if let Some(p) = &problem.pair {
                    let v = next[s][i];
                    rec.sandwich_violation = rec.sandwich_violation.max(p.lower[s][i] - v).max(v - p.upper[s][i]);
                }
            }
        }
        u = next;
        log.push(rec);
        if rec.increment <= tol * scale {
            converged = true;
            break;
        }
    }
    Ok(GridSolution { values: u, log, converged, scale, tol })
}

fn no_pair() -> Error {
    Error::Config("starting from a comparison function needs the pair on the grid".into())
}
