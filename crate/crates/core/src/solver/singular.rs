use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::grid::{build_grid, build_grid_resolved, ExcisedGrid, NodeRole};
use super::march::{iterate, GridSolution, PairSamples, SemilinearProblem, Start};
use super::{Reaction, SolverSettings};
use crate::comparison::{ComparisonSolution, Family};
use crate::error::{Error, Result};
use crate::geometry::MovingManifold;
use crate::output::{fmt_f64, write_csv};
use crate::potential::{eval_u, QuadratureConfig};

/// `U` at every node active in any of `grids` (identical layouts), `NaN` elsewhere.
pub fn sample_potential(mm: &MovingManifold, grids: &[&ExcisedGrid], cfg: &QuadratureConfig) -> Result<Vec<Vec<f64>>> {
    let g0 = grids.first().ok_or_else(|| Error::Internal("no grid to sample".into()))?;
    if grids.iter().any(|g| g.n_nodes() != g0.n_nodes() || g.times != g0.times) {
        return Err(Error::Internal("grids do not share a layout".into()));
    }
    let lower = mm.lower_time();
    let tasks: Vec<(usize, usize)> = (0..g0.n_slices())
        .flat_map(|s| (0..g0.n_nodes()).map(move |i| (s, i)))
        .filter(|&(s, i)| grids.iter().any(|g| g.roles[s][i] != NodeRole::Outside))
        .collect();
    let vals: Vec<Result<f64>> =
        tasks.par_iter().map(|&(s, i)| Ok(eval_u(mm, lower, &g0.ambient_point(i), g0.times[s], cfg)?.value)).collect();
    let mut out = vec![vec![f64::NAN; g0.n_nodes()]; g0.n_slices()];
    for (&(s, i), v) in tasks.iter().zip(vals) {
        out[s][i] = v?;
    }
    Ok(out)
}

fn sample(sol: &ComparisonSolution, u: &[Vec<f64>]) -> Vec<Vec<f64>> {
    u.iter().map(|s| s.iter().map(|&v| if v.is_finite() { sol.value(v) } else { f64::NAN }).collect()).collect()
}

/// `max(u̲, 0)`: zero solves the equation, so the positive part is still a
/// (discrete) sub-solution, and it keeps the outer data nonnegative.
fn sample_lower(sub: &ComparisonSolution, u: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = sample(sub, u);
    for v in out.iter_mut().flatten() {
        *v = v.max(0.0);
    }
    out
}

/// Smallest `Ã ≥ a_start` for which the sampled pair is a discrete
/// super/sub-solution of the backward-Euler scheme at every interior node.
pub fn discrete_offset(
    grid: &ExcisedGrid,
    u: &[Vec<f64>],
    pair: (&ComparisonSolution, &ComparisonSolution),
    a_start: f64,
    cap: f64,
) -> Result<f64> {
    let (sup, sub) = pair;
    let reaction = Reaction::Absorption { p: sup.p };
    let dt = grid.dt();
    // Ã-free operator part D = M ∂_t b − M Δ_h b per interior node
    let parts = |sol: &ComparisonSolution| -> Vec<(f64, f64, f64)> {
        let base = sample(&sol.with_a_tilde(0.0), u);
        let mut out = Vec::new();
        for s in 1..grid.n_slices() {
            for i in 0..grid.n_nodes() {
                if grid.roles[s][i] != NodeRole::Interior {
                    continue;
                }
                let m = grid.measure(i);
                let before = if grid.roles[s - 1][i] == NodeRole::Outside { base[s][i] } else { base[s - 1][i] };
                let mut d = m * (base[s][i] - before) / dt;
                for (j, w) in grid.neighbors(i) {
                    d += w * (base[s][i] - base[s][j]);
                }
                out.push((d, m, base[s][i]));
            }
        }
        out
    };
    let (p_sup, p_sub) = (parts(sup), parts(sub));
    let passes = |a: f64| {
        let ok_sup = p_sup.iter().all(|&(d, m, b)| {
            let r = d - m * reaction.value(b + a);
            r >= -1e-12 * (d.abs() + m * reaction.value(b + a).abs())
        });
        let ok_sub = p_sub.iter().all(|&(d, m, b)| {
            let r = d - m * reaction.value(b - a);
            r <= 1e-12 * (d.abs() + m * reaction.value(b - a).abs())
        });
        ok_sup && ok_sub
    };
    if passes(a_start) {
        return Ok(a_start);
    }
    let mut hi = a_start.max(1e-3) * 2.0;
    while !passes(hi) {
        hi *= 2.0;
        if hi > cap {
            return Err(Error::Convergence(format!("no offset below {cap} makes the sampled pair a discrete pair")));
        }
    }
    let mut lo = a_start;
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if passes(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryLawRow {
    pub t: f64,
    pub shell_d: f64,
    /// Shell mean of `d^e u / amplitude`.
    pub ratio: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShellSummary {
    pub shell_d: f64,
    pub min: f64,
    pub max: f64,
    /// `(max_t − min_t)/mean_t` of the shell means.
    pub spread: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryLawReport {
    pub strong: bool,
    pub amplitude: f64,
    /// `N − 2` (weak) or `2/(p−1)` (strong).
    pub exponent: f64,
    pub rows: Vec<BoundaryLawRow>,
    pub shells: Vec<ShellSummary>,
    pub min_value: f64,
}

impl BoundaryLawReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| vec![fmt_f64(r.t), fmt_f64(r.shell_d), fmt_f64(r.ratio), fmt_f64(r.ratio_min), fmt_f64(r.ratio_max)])
            .collect();
        write_csv(path, &["t", "shell_d", "ratio", "ratio_min", "ratio_max"], &rows)
    }

    pub fn shell(&self, d: f64) -> Option<&ShellSummary> {
        self.shells.iter().find(|s| (s.shell_d - d).abs() <= 1e-12 * d)
    }

    fn build(
        grid: &ExcisedGrid,
        sol: &GridSolution,
        law: &ComparisonSolution,
        codim: usize,
        settings: &SolverSettings,
    ) -> Result<Self> {
        let strong = matches!(law.family, Family::StrongSuper | Family::StrongSub);
        let codim = codim as f64;
        let exponent = if strong { 2.0 / (law.p - 1.0) } else { codim - 2.0 };
        let amplitude = law.amplitude();
        let mut rows = Vec::new();
        let mut shells = Vec::new();
        for &k in &settings.shells {
            let d = k * grid.delta_exc;
            let mut means = Vec::new();
            for s in 1..grid.n_slices() {
                let t = grid.times[s];
                let pts = grid.shell_points(d, t, settings.shell_points)?;
                let mut ratios = Vec::with_capacity(pts.len());
                for p in &pts {
                    let v = grid.interpolate(&sol.values[s], p).ok_or_else(|| {
                        Error::Config(format!("probe shell d = {d} is not covered by active cells at t = {t}"))
                    })?;
                    ratios.push(d.powf(exponent) * v / amplitude);
                }
                let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
                let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                rows.push(BoundaryLawRow { t, shell_d: d, ratio: mean, ratio_min: lo, ratio_max: hi });
                means.push(mean);
            }
            let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let avg = means.iter().sum::<f64>() / means.len() as f64;
            let all_lo = rows.iter().filter(|r| r.shell_d == d).map(|r| r.ratio_min).fold(f64::INFINITY, f64::min);
            let all_hi = rows.iter().filter(|r| r.shell_d == d).map(|r| r.ratio_max).fold(f64::NEG_INFINITY, f64::max);
            shells.push(ShellSummary { shell_d: d, min: all_lo, max: all_hi, spread: (hi - lo) / avg });
        }
        Ok(BoundaryLawReport { strong, amplitude, exponent, rows, shells, min_value: sol.min_interior(grid) })
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} law: d^{:.4} u / {:.4}\n",
            if self.strong { "strong" } else { "weak" },
            self.exponent,
            self.amplitude
        );
        for sh in &self.shells {
            s += &format!(
                "  d = {:.4}: ratio in [{:.4}, {:.4}], spread over t {:.2}%\n",
                sh.shell_d,
                sh.min,
                sh.max,
                100.0 * sh.spread
            );
        }
        s += &format!("  min u = {:.3e}\n", self.min_value);
        s
    }
}

#[derive(Debug, Clone)]
pub struct SingularRun {
    pub grid: ExcisedGrid,
    pub a_tilde_input: f64,
    /// Offset used on the grid (discrete pair condition).
    pub a_tilde: f64,
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
    /// Sub-solution boundary data, started from the sub-solution.
    pub from_sub: GridSolution,
    /// Sub-solution boundary data, started from the super-solution.
    pub from_super: GridSolution,
    /// Super-solution boundary data, started from the super-solution.
    pub super_data: GridSolution,
    pub laws: BoundaryLawReport,
    pub laws_super_data: BoundaryLawReport,
    /// `max |u_sub-start − u_super-start|` over interior nodes.
    pub start_gap: f64,
    /// Largest `|u_sub-start − u_super-start| / (ū − u̲)`.
    pub start_gap_band_ratio: f64,
    pub interior_connected: bool,
}

impl SingularRun {
    pub fn summary(&self) -> String {
        let g = &self.grid;
        let mut s = format!(
            "grid: {:?}, N = {:?}, delta = {:.4}, A = {:.2}, {} nodes x {} slices, interior connected: {}\n",
            g.mode,
            g.exhaustion_index,
            g.delta_exc,
            g.outer_radius,
            g.n_nodes(),
            g.n_slices(),
            self.interior_connected
        );
        s += &format!("offset: input {:.4}, discrete pair {:.4}\n", self.a_tilde_input, self.a_tilde);
        for (name, run) in [("sub start", &self.from_sub), ("super start", &self.from_super), ("super data", &self.super_data)] {
            s += &format!(
                "{name}: {} sweeps, converged {}, monotone violation {:.2e}, sandwich violation {:.2e}\n",
                run.sweeps(),
                run.converged,
                run.max_monotone_violation() / run.scale,
                run.max_sandwich_violation() / run.scale
            );
        }
        s += &format!(
            "start gap {:.3e} ({:.3e} of the local pair band)\n",
            self.start_gap, self.start_gap_band_ratio
        );
        s += "sub-solution boundary data:\n";
        s += &self.laws.summary();
        s += "super-solution boundary data:\n";
        s += &self.laws_super_data.summary();
        s
    }

    /// Values at interior and boundary nodes of every `every`-th slice and
    /// the last one, from sub-solution and super-solution data.
    pub fn write_snapshots(&self, path: &Path, every: usize) -> Result<()> {
        let g = &self.grid;
        let dims = g.axes.len();
        let coord_names: Vec<String> = (0..dims).map(|k| format!("x{k}")).collect();
        let mut header: Vec<&str> = vec!["slice", "t"];
        header.extend(coord_names.iter().map(|s| s.as_str()));
        header.extend(["d", "role", "u_sub_data", "u_super_data"]);
        let last = g.n_slices() - 1;
        let mut rows = Vec::new();
        for s in (0..g.n_slices()).filter(|s| s % every.max(1) == 0 || *s == last) {
            for i in 0..g.n_nodes() {
                let role = match g.roles[s][i] {
                    NodeRole::Interior => "interior",
                    NodeRole::Boundary => "boundary",
                    NodeRole::Outside => continue,
                };
                let mut row = vec![s.to_string(), fmt_f64(g.times[s])];
                row.extend(g.coords(i).into_iter().map(fmt_f64));
                row.push(fmt_f64(g.distance[s][i]));
                row.push(role.into());
                row.push(fmt_f64(self.from_sub.values[s][i]));
                row.push(fmt_f64(self.super_data.values[s][i]));
                rows.push(row);
            }
        }
        write_csv(path, &header, &rows)
    }

    /// Per-sweep increments and certificate violations of the three runs.
    pub fn iteration_log(&self) -> String {
        let mut s = String::new();
        for (name, run) in [("sub start", &self.from_sub), ("super start", &self.from_super), ("super data", &self.super_data)] {
            s += &format!("# {name}: converged {}, scale {:.6e}, tol {:.1e}\n", run.converged, run.scale, run.tol);
            s += &run.iteration_log();
        }
        s
    }
}

fn problem_with(
    p: f64,
    initial: &[f64],
    boundary: &[Vec<f64>],
    lower: &[Vec<f64>],
    upper: &[Vec<f64>],
) -> SemilinearProblem {
    SemilinearProblem {
        reaction: Reaction::Absorption { p },
        initial: initial.to_vec(),
        boundary: boundary.to_vec(),
        pair: Some(PairSamples { lower: lower.to_vec(), upper: upper.to_vec() }),
    }
}

/// Leading term `c U` or `L U^β` of the pair at slice 0.
fn leading_initial(sup: &ComparisonSolution, u: &[Vec<f64>]) -> Vec<f64> {
    let (a, e) = sup.terms[0];
    u[0].iter().map(|&v| if v.is_finite() { a * v.powf(e) } else { f64::NAN }).collect()
}

/// Singular solution between the pair on the excised grid of index
/// `settings.n_index`, with initial data the pair's leading term.
pub fn solve_singular(
    mm: &MovingManifold,
    pair: (&ComparisonSolution, &ComparisonSolution),
    settings: &SolverSettings,
    cfg: &QuadratureConfig,
) -> Result<SingularRun> {
    let (sup, sub) = pair;
    if !sup.family.is_super() || sub.family.is_super() {
        return Err(Error::Config("pair must be (super, sub)".into()));
    }
    let grid = build_grid(mm, settings, settings.n_index)?;
    let u = sample_potential(mm, &[&grid], cfg)?;
    let a_tilde = discrete_offset(&grid, &u, pair, sup.a_tilde.max(sub.a_tilde), 1e6)?;
    let (sup, sub) = (sup.with_a_tilde(a_tilde), sub.with_a_tilde(a_tilde));
    let lower = sample_lower(&sub, &u);
    let upper = sample(&sup, &u);
    let initial = leading_initial(&sup, &u);
    let prob = problem_with(sup.p, &initial, &lower, &lower, &upper);
    let from_sub = iterate(&prob, &grid, Start::Lower, settings.tol, settings.max_sweeps)?;
    let from_super = iterate(&prob, &grid, Start::Upper, settings.tol, settings.max_sweeps)?;
    let prob_sup = problem_with(sup.p, &initial, &upper, &lower, &upper);
    let super_data = iterate(&prob_sup, &grid, Start::Upper, settings.tol, settings.max_sweeps)?;
    for (name, run) in [("sub start", &from_sub), ("super start", &from_super), ("super data", &super_data)] {
        // discretisation cannot explain leaving the pair by more than roundoff
        if run.max_sandwich_violation() > 1e-8 * run.scale {
            return Err(Error::Convergence(format!(
                "{name}: iterate leaves the comparison pair by {:.3e}",
                run.max_sandwich_violation()
            )));
        }
    }
    let mut start_gap: f64 = 0.0;
    let mut band_ratio: f64 = 0.0;
    for s in 0..grid.n_slices() {
        for i in 0..grid.n_nodes() {
            if grid.roles[s][i] == NodeRole::Interior {
                let gap = (from_sub.values[s][i] - from_super.values[s][i]).abs();
                start_gap = start_gap.max(gap);
                let band = upper[s][i] - lower[s][i];
                band_ratio = band_ratio.max(gap / band);
            }
        }
    }
    let laws = BoundaryLawReport::build(&grid, &from_sub, &sup, mm.codim(), settings)?;
    let laws_super_data = BoundaryLawReport::build(&grid, &super_data, &sup, mm.codim(), settings)?;
    let interior_connected = (0..grid.n_slices()).all(|s| grid.interior_connected(s));
    Ok(SingularRun {
        a_tilde_input: pair.0.a_tilde.max(pair.1.a_tilde),
        a_tilde,
        lower,
        upper,
        from_sub,
        from_super,
        super_data,
        laws,
        laws_super_data,
        start_gap,
        start_gap_band_ratio: band_ratio,
        interior_connected,
        grid,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExhaustionRow {
    pub n_index: usize,
    pub delta_exc: f64,
    pub outer_radius: f64,
    /// Final-slice values at the probes, sub-solution data.
    pub lower_values: Vec<f64>,
    /// Final-slice values at the probes, super-solution data.
    pub upper_values: Vec<f64>,
    pub sweeps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExhaustionTable {
    pub probes: Vec<Vec<f64>>,
    pub rows: Vec<ExhaustionRow>,
    /// `max_probe |u_{N_k} − u_{N_{k+1}}|` for the sub-data sequence.
    pub cauchy: Vec<f64>,
    pub cauchy_upper: Vec<f64>,
    /// Largest `u̲_N − u̲_{N'}` (N < N') at shared interior nodes.
    pub lower_order_violation: f64,
    /// Largest `ū_{N'} − ū_N` (N < N') at shared interior nodes.
    pub upper_order_violation: f64,
    pub a_tilde: f64,
    pub scale: f64,
}

impl ExhaustionTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut rows = Vec::new();
        for r in &self.rows {
            for (k, p) in self.probes.iter().enumerate() {
                let coords = p.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" ");
                rows.push(vec![
                    r.n_index.to_string(),
                    fmt_f64(r.delta_exc),
                    coords,
                    fmt_f64(r.lower_values[k]),
                    fmt_f64(r.upper_values[k]),
                ]);
            }
        }
        write_csv(path, &["n_index", "delta_exc", "probe", "u_sub_data", "u_super_data"], &rows)
    }

    pub fn summary(&self) -> String {
        let mut s = String::from("N, delta, sweeps, probe values (sub data)\n");
        for r in &self.rows {
            let v: Vec<String> = r.lower_values.iter().map(|v| format!("{v:.6}")).collect();
            s += &format!("{:>4} {:.4} {:>5}  {}\n", r.n_index, r.delta_exc, r.sweeps, v.join(" "));
        }
        s += &format!("Cauchy differences (sub data): {:?}\n", self.cauchy);
        s += &format!("Cauchy differences (super data): {:?}\n", self.cauchy_upper);
        s += &format!(
            "ordering violations: sub data {:.2e}, super data {:.2e}\n",
            self.lower_order_violation, self.upper_order_violation
        );
        s
    }
}

/// Solutions on the nested domains of `ladder`, all on the grid resolved for
/// the largest index so interior node sets are nested.
pub fn exhaustion_study(
    mm: &MovingManifold,
    pair: (&ComparisonSolution, &ComparisonSolution),
    settings: &SolverSettings,
    ladder: &[usize],
    probes: &[Vec<f64>],
    cfg: &QuadratureConfig,
) -> Result<ExhaustionTable> {
    let mut ladder = ladder.to_vec();
    ladder.sort_unstable();
    ladder.dedup();
    if ladder.len() < 3 {
        return Err(Error::Config("exhaustion study needs at least three indices".into()));
    }
    if settings.horizon > ladder[0] as f64 {
        return Err(Error::Config("horizon must not exceed the smallest exhaustion index".into()));
    }
    let top = *ladder.last().unwrap();
    let grids: Vec<ExcisedGrid> =
        ladder.iter().map(|&n| build_grid_resolved(mm, settings, n, top)).collect::<Result<_>>()?;
    let refs: Vec<&ExcisedGrid> = grids.iter().collect();
    let u = sample_potential(mm, &refs, cfg)?;
    let mut a_tilde = pair.0.a_tilde.max(pair.1.a_tilde);
    for g in &grids {
        a_tilde = discrete_offset(g, &u, pair, a_tilde, 1e6)?;
    }
    let (sup, sub) = (pair.0.with_a_tilde(a_tilde), pair.1.with_a_tilde(a_tilde));
    let lower = sample_lower(&sub, &u);
    let upper = sample(&sup, &u);
    let initial = leading_initial(&sup, &u);
    let mut rows = Vec::new();
    let mut lows = Vec::new();
    let mut highs = Vec::new();
    let mut scale: f64 = 1.0;
    for (g, &n) in grids.iter().zip(&ladder) {
        let lo_run = iterate(&problem_with(sup.p, &initial, &lower, &lower, &upper), g, Start::Lower, settings.tol, settings.max_sweeps)?;
        let hi_run = iterate(&problem_with(sup.p, &initial, &upper, &lower, &upper), g, Start::Upper, settings.tol, settings.max_sweeps)?;
        scale = scale.max(lo_run.scale);
        let last = g.n_slices() - 1;
        let at = |run: &GridSolution| -> Result<Vec<f64>> {
            probes
                .iter()
                .map(|p| {
                    g.interpolate(&run.values[last], p)
                        .ok_or_else(|| Error::Config(format!("probe {p:?} is not interior for N = {n}")))
                })
                .collect()
        };
        rows.push(ExhaustionRow {
            n_index: n,
            delta_exc: g.delta_exc,
            outer_radius: g.outer_radius,
            lower_values: at(&lo_run)?,
            upper_values: at(&hi_run)?,
            sweeps: lo_run.sweeps().max(hi_run.sweeps()),
        });
        lows.push(lo_run);
        highs.push(hi_run);
    }
    let diffs = |pick: fn(&ExhaustionRow) -> &Vec<f64>| -> Vec<f64> {
        rows.windows(2)
            .map(|w| pick(&w[0]).iter().zip(pick(&w[1])).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .collect()
    };
    let cauchy = diffs(|r| &r.lower_values);
    let cauchy_upper = diffs(|r| &r.upper_values);
    let mut lower_order_violation: f64 = 0.0;
    let mut upper_order_violation: f64 = 0.0;
    for k in 0..grids.len() {
        for k2 in k + 1..grids.len() {
            for s in 0..grids[k].n_slices() {
                for i in 0..grids[k].n_nodes() {
                    if grids[k].roles[s][i] == NodeRole::Interior {
                        lower_order_violation = lower_order_violation.max(lows[k].values[s][i] - lows[k2].values[s][i]);
                        upper_order_violation = upper_order_violation.max(highs[k2].values[s][i] - highs[k].values[s][i]);
                    }
                }
            }
        }
    }
    Ok(ExhaustionTable {
        probes: probes.to_vec(),
        rows,
        cauchy,
        cauchy_upper,
        lower_order_violation,
        upper_order_violation,
        a_tilde,
        scale,
    })
}
