//! Scenario-driven commands behind the `singheat` binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use singheat::capacity::{capacity_scan_multi, Verdict};
use singheat::comparison::verify_signs;
use singheat::potential::{asymptotics_scan, flat_selftest, Region};
use singheat::scenario::{Purpose, ScenarioConfig};
use singheat::solver::{exhaustion_study, ode_sanity, solve_singular};
use singheat::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
    pub summary: String,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_echo: String,
    pub stages: Vec<Stage>,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.stages.iter().flat_map(|s| &s.checks).all(|c| c.passed)
    }

    /// Human-readable report; everything except the wall-clock lines is a
    /// function of config and seed.
    pub fn render(&self) -> String {
        let mut s = String::new();
        writeln!(s, "singheat {} :: {} (seed {})", self.version, self.command, self.seed).unwrap();
        for st in &self.stages {
            writeln!(s, "\n== {} ==", st.name).unwrap();
            writeln!(s, "wall-clock: {:.2} s", st.seconds).unwrap();
            s += &st.summary;
            if !st.summary.ends_with('\n') {
                s.push('\n');
            }
            for c in &st.checks {
                writeln!(s, "[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail).unwrap();
            }
            for f in &st.files {
                writeln!(s, "wrote {}", f.display()).unwrap();
            }
        }
        writeln!(s, "\n== config ==").unwrap();
        s += &self.config_echo;
        s
    }
}

fn timed(name: &str, f: impl FnOnce(&mut Stage) -> Result<()>) -> Result<Stage> {
    let t0 = Instant::now();
    let mut st = Stage { name: name.into(), seconds: 0.0, summary: String::new(), checks: Vec::new(), files: Vec::new() };
    f(&mut st)?;
    st.seconds = t0.elapsed().as_secs_f64();
    Ok(st)
}

fn family_name(strong: bool) -> &'static str {
    if strong {
        "strong"
    } else {
        "weak"
    }
}

pub fn run_potential(cfg: &ScenarioConfig, out: &Path, flat: bool) -> Result<Stage> {
    cfg.validate(Purpose::Potential)?;
    timed("potential", |st| {
        let mm = cfg.moving_manifold()?;
        let rep = asymptotics_scan(&mm, cfg.lower_time, &cfg.potential, &cfg.quadrature, cfg.seed)?;
        let path = out.join("potential_asymptotics.csv");
        rep.write_csv(&path)?;
        st.files.push(path);
        st.summary = rep.summary();
        let nf = rep.codim as f64;
        let near = |r: &&singheat::potential::AsymptoticsRow| r.region == Region::Near;
        if let Some(d0) = rep.rows.iter().filter(near).map(|r| r.offset).reduce(f64::min) {
            let at: Vec<_> = rep.rows.iter().filter(near).filter(|r| r.offset == d0).collect();
            let (lo, hi) = at.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, r| (a.0.min(r.d_pow_u), a.1.max(r.d_pow_u)));
            st.checks.push(Check::new(
                format!("near-field d^(N-2) U at d = {d0}"),
                lo >= 0.95 && hi <= 1.05,
                format!("range [{lo:.5}, {hi:.5}] within [0.95, 1.05]"),
            ));
            let (glo, ghi) =
                at.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, r| (a.0.min(r.d_pow_grad), a.1.max(r.d_pow_grad)));
            st.checks.push(Check::new(
                format!("near-field d^(N-1) |grad U| at d = {d0}"),
                glo >= 0.9 * (nf - 2.0) && ghi <= 1.1 * (nf - 2.0),
                format!("range [{glo:.5}, {ghi:.5}] within (N-2)·[0.9, 1.1]"),
            ));
            if let Some(&(_, spread)) = rep.uniformity.iter().find(|u| u.0 == d0) {
                st.checks.push(Check::new("near-field uniformity over t", spread < 0.05, format!("spread {spread:.4} < 0.05")));
            }
        }
        // the far law needs horizons of order d², which a moving manifold
        // may not reach before its lower time; the summary says so
        if mm.is_compact() && rep.far_fitted > 0 {
            let want = -(cfg.dimensions.n as f64 - 2.0);
            st.checks.push(Check::new(
                "far-field slope",
                (rep.far_slope - want).abs() <= 0.1,
                format!("{:.4} vs {want} ± 0.1 over {} probes", rep.far_slope, rep.far_fitted),
            ));
        }
        let worst = rep
            .rows
            .iter()
            .filter(|r| r.d >= 0.01)
            .map(|r| r.heat_residual.abs() / (1.0 + r.laplacian.abs()))
            .fold(0.0, f64::max);
        st.checks.push(Check::new("heat residual", worst <= 1e-4, format!("max |dtU - lapU|/(1+|lapU|) = {worst:.2e}")));
        if flat {
            let err = flat_selftest(cfg.dimensions.n, cfg.dimensions.m, &[0.1, 0.5, 2.0], &[4.0, 100.0], &cfg.quadrature)?;
            writeln!(st.summary, "flat-plane self-test: max rel err {err:.3e}").unwrap();
            st.checks.push(Check::new("flat-plane oracle", err <= 1e-8, format!("max rel err {err:.3e} <= 1e-8")));
        }
        Ok(())
    })
}

/// Minimal `Ã` per requested family (weak first), alongside the stage.
pub fn run_comparison(cfg: &ScenarioConfig, out: &Path, fd_check: bool) -> Result<(Stage, Vec<(bool, Option<f64>)>)> {
    cfg.validate(Purpose::Comparison)?;
    let mut minima = Vec::new();
    let st = timed("comparison", |st| {
        let mm = cfg.moving_manifold()?;
        let mut plan = cfg.comparison.clone();
        plan.fd_check |= fd_check;
        for strong in [false, true] {
            if !cfg.exponents.family.includes(strong) {
                continue;
            }
            let (sup, sub) = cfg.pair(strong)?;
            let rep = verify_signs(&mm, cfg.lower_time, (&sup, &sub), cfg.exponents.a, &plan, &cfg.quadrature, cfg.seed)?;
            let name = family_name(strong);
            let path = out.join(format!("comparison_{name}.csv"));
            rep.write_csv(&path)?;
            st.files.push(path);
            writeln!(st.summary, "{name} pair:").unwrap();
            st.summary += &rep.summary();
            let detail = match rep.a_tilde_min {
                Some(a) => format!("minimal A~ = {a:.6}"),
                None => format!("no A~ below {}", plan.a_cap),
            };
            st.checks.push(Check::new(format!("{name} signs"), rep.passed(), detail));
            if plan.fd_check {
                st.checks.push(Check::new(
                    format!("{name} closed form vs FD"),
                    rep.max_rel_gap < 1e-3,
                    format!("max rel gap {:.2e} over {} probes", rep.max_rel_gap, rep.fd_checked),
                ));
            }
            minima.push((strong, rep.a_tilde_min));
        }
        Ok(())
    })?;
    Ok((st, minima))
}

pub fn run_capacity(cfg: &ScenarioConfig, out: &Path) -> Result<Stage> {
    cfg.validate(Purpose::Capacity)?;
    timed("capacity", |st| {
        let mm = cfg.moving_manifold()?;
        let p_star = {
            let nf = mm.codim() as f64;
            nf / (nf - 2.0)
        };
        let profiles = capacity_scan_multi(&mm, &cfg.capacity.p, &cfg.capacity.plan, &cfg.quadrature, cfg.seed)?;
        for prof in &profiles {
            let path = out.join(format!("capacity_p{}.csv", prof.p));
            prof.write_csv(&path)?;
            st.files.push(path);
            st.summary += &prof.summary();
            let want = if prof.p >= p_star { Verdict::Decaying } else { Verdict::Diverging };
            st.checks.push(Check::new(
                format!("capacity verdict p = {}", prof.p),
                prof.verdict == want,
                format!("{:?} (p_* = {p_star})", prof.verdict),
            ));
        }
        Ok(())
    })
}

#[derive(Debug, Clone, Default)]
pub struct SolveFlags {
    pub ode_sanity: bool,
    /// Exhaustion ladder; `Some(empty)` uses the configured one.
    pub exhaustion: Option<Vec<usize>>,
}

/// `known` carries minimal `Ã` values already measured by a comparison run.
pub fn run_solve(cfg: &ScenarioConfig, out: &Path, flags: &SolveFlags, known: &[(bool, Option<f64>)]) -> Result<Stage> {
    cfg.validate(Purpose::Solve)?;
    timed("solve", |st| {
        let mm = cfg.moving_manifold()?;
        let settings = &cfg.solver;
        if flags.ode_sanity {
            let r = ode_sanity(cfg.exponents.p, 1.0, 5.0, 1e-3)?;
            writeln!(st.summary, "ODE sanity (p = {}, u* = 1, t <= 5, dt = 1e-3): max error {:.3e}", r.p, r.max_error).unwrap();
            st.checks.push(Check::new("ODE oracle", r.max_error <= 1e-3, format!("max error {:.3e} <= 1e-3", r.max_error)));
        }
        for strong in [false, true] {
            if !cfg.exponents.family.includes(strong) {
                continue;
            }
            let name = family_name(strong);
            let (mut sup, mut sub) = cfg.pair(strong)?;
            if cfg.exponents.a_tilde.is_none() {
                let a = match known.iter().find(|k| k.0 == strong) {
                    Some(&(_, a)) => a,
                    None => {
                        verify_signs(&mm, cfg.lower_time, (&sup, &sub), cfg.exponents.a, &cfg.comparison, &cfg.quadrature, cfg.seed)?
                            .a_tilde_min
                    }
                };
                let a = a.ok_or_else(|| Error::Convergence(format!("{name} pair: no admissible A~ on the probe lattice")))?;
                sup = sup.with_a_tilde(a);
                sub = sub.with_a_tilde(a);
            }
            let run = solve_singular(&mm, (&sup, &sub), settings, &cfg.quadrature)?;
            writeln!(st.summary, "{name} run:").unwrap();
            st.summary += &run.summary();
            for (suffix, rep) in [("laws", &run.laws), ("laws_super_data", &run.laws_super_data)] {
                let path = out.join(format!("solve_{name}_{suffix}.csv"));
                rep.write_csv(&path)?;
                st.files.push(path);
            }
            let path = out.join(format!("solve_{name}_snapshots.csv"));
            run.write_snapshots(&path, settings.snapshot_every)?;
            st.files.push(path);
            let path = out.join(format!("solve_{name}_iterations.txt"));
            std::fs::write(&path, run.iteration_log())?;
            st.files.push(path);

            let sol = &run.from_sub;
            st.checks.push(Check::new(
                format!("{name} monotone iteration"),
                [&run.from_sub, &run.from_super, &run.super_data]
                    .iter()
                    .all(|r| r.converged && r.max_monotone_violation() <= 1e-10 * r.scale),
                format!("sub start {:.2e} of scale", sol.max_monotone_violation() / sol.scale),
            ));
            st.checks.push(Check::new(
                format!("{name} sandwich"),
                [&run.from_sub, &run.from_super, &run.super_data].iter().all(|r| r.max_sandwich_violation() <= 1e-10 * r.scale),
                format!("{:.2e}", sol.max_sandwich_violation()),
            ));
            st.checks.push(Check::new(
                format!("{name} start independence"),
                run.start_gap_band_ratio < 1.0,
                format!("gap {:.2e} = {:.2e} of the pair band", run.start_gap, run.start_gap_band_ratio),
            ));
            st.checks.push(Check::new(
                format!("{name} nonnegativity"),
                run.laws.min_value >= -1e-10,
                format!("min u = {:.3e}", run.laws.min_value),
            ));
            let band = if strong { (0.8, 1.2) } else { (0.85, 1.15) };
            let shell = settings.shells.first().copied().unwrap_or(2.0) * run.grid.delta_exc;
            for (label, rep) in [("sub data", &run.laws), ("super data", &run.laws_super_data)] {
                if let Some(sh) = rep.shell(shell) {
                    st.checks.push(Check::new(
                        format!("{name} boundary law ({label}) at d = {shell}"),
                        sh.min >= band.0 && sh.max <= band.1 && sh.spread <= 0.1,
                        format!(
                            "ratio in [{:.4}, {:.4}] vs [{}, {}], spread over t {:.2}%",
                            sh.min,
                            sh.max,
                            band.0,
                            band.1,
                            100.0 * sh.spread
                        ),
                    ));
                }
            }
            if let Some(ladder) = &flags.exhaustion {
                let ladder = if ladder.is_empty() { settings.n_ladder.clone() } else { ladder.clone() };
                let tab = exhaustion_study(&mm, (&sup, &sub), settings, &ladder, &settings.probes, &cfg.quadrature)?;
                let path = out.join(format!("exhaustion_{name}.csv"));
                tab.write_csv(&path)?;
                st.files.push(path);
                st.summary += &tab.summary();
                st.checks.push(Check::new(
                    format!("{name} exhaustion ordering"),
                    tab.lower_order_violation <= 1e-10 * tab.scale && tab.upper_order_violation <= 1e-10 * tab.scale,
                    format!("violations {:.2e} / {:.2e}", tab.lower_order_violation, tab.upper_order_violation),
                ));
                let shrink = tab.cauchy.windows(2).all(|w| w[0] >= 2.0 * w[1]);
                st.checks.push(Check::new(
                    format!("{name} exhaustion Cauchy"),
                    shrink,
                    format!("differences {:?}", tab.cauchy.iter().map(|c| format!("{c:.3e}")).collect::<Vec<_>>()),
                ));
            }
        }
        Ok(())
    })
}

#[derive(Debug, Clone)]
pub enum Command {
    Potential { flat_selftest: bool },
    Comparison { fd_check: bool },
    Capacity,
    Solve(SolveFlags),
    All { flat_selftest: bool, fd_check: bool, solve: SolveFlags },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Potential { .. } => "potential",
            Command::Comparison { .. } => "comparison",
            Command::Capacity => "capacity",
            Command::Solve(_) => "solve",
            Command::All { .. } => "all",
        }
    }
}

/// Validates everything the command needs, runs it, and writes the report
/// and config echo into `out`.
pub fn execute(cfg: &ScenarioConfig, command: &Command, out: &Path) -> Result<RunReport> {
    let purposes: &[Purpose] = match command {
        Command::Potential { .. } => &[Purpose::Potential],
        Command::Comparison { .. } => &[Purpose::Comparison],
        Command::Capacity => &[Purpose::Capacity],
        Command::Solve(_) => &[Purpose::Solve],
        Command::All { .. } => &[Purpose::Potential, Purpose::Comparison, Purpose::Capacity, Purpose::Solve],
    };
    for p in purposes {
        cfg.validate(*p)?;
    }
    std::fs::create_dir_all(out)?;
    let echo = cfg.to_toml()?;
    std::fs::write(out.join("config.toml"), &echo)?;
    let mut stages = Vec::new();
    match command {
        Command::Potential { flat_selftest } => stages.push(run_potential(cfg, out, *flat_selftest)?),
        Command::Comparison { fd_check } => stages.push(run_comparison(cfg, out, *fd_check)?.0),
        Command::Capacity => stages.push(run_capacity(cfg, out)?),
        Command::Solve(flags) => stages.push(run_solve(cfg, out, flags, &[])?),
        Command::All { flat_selftest, fd_check, solve } => {
            stages.push(run_potential(cfg, out, *flat_selftest)?);
            let (st, minima) = run_comparison(cfg, out, *fd_check)?;
            stages.push(st);
            stages.push(run_capacity(cfg, out)?);
            stages.push(run_solve(cfg, out, solve, &minima)?);
        }
    }
    let report = RunReport {
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.name().into(),
        seed: cfg.seed,
        config_echo: echo,
        stages,
    };
    std::fs::write(out.join("report.txt"), report.render())?;
    Ok(report)
}

/// 0 success, 1 compute failure, 2 configuration or regime error.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_input_error() {
        2
    } else {
        1
    }
}
