use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::residual::{absorption, FdStencil, ResidualParts};
use super::ComparisonSolution;
use crate::error::{Error, Result};
use crate::geometry::manifold::moved_jet;
use crate::geometry::MovingManifold;
use crate::output::{fmt_f64, write_csv};
use crate::potential::{eval_u, QuadratureConfig};
use crate::rng::{random_normal, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbePlan {
    pub t_samples: Vec<f64>,
    /// Probes per (region, t) cell.
    pub per_cell: usize,
    pub d_min: f64,
    /// Near/intermediate threshold.
    pub r0: f64,
    /// Intermediate/far threshold.
    pub big_r0: f64,
    pub d_max: f64,
    pub fd_check: bool,
    /// Largest `Ã` tried before giving up.
    pub a_cap: f64,
    /// Worst lattice probes per time sample that seed a local search for a
    /// more demanding point nearby.
    pub refine: usize,
}

impl Default for ProbePlan {
    fn default() -> Self {
        ProbePlan {
            t_samples: vec![0.0, 1.0, 10.0, 100.0],
            per_cell: 200,
            d_min: 0.01,
            r0: 0.25,
            big_r0: 4.0,
            d_max: 40.0,
            fd_check: true,
            a_cap: 1e6,
            refine: 3,
        }
    }
}

impl ProbePlan {
    fn region_of(&self, d: f64) -> ProbeRegion {
        if d < self.r0 {
            ProbeRegion::Near
        } else if d < self.big_r0 {
            ProbeRegion::Intermediate
        } else {
            ProbeRegion::Far
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.per_cell > 0
            && !self.t_samples.is_empty()
            && self.d_min > 0.0
            && self.d_min < self.r0
            && self.r0 < self.big_r0
            && self.big_r0 < self.d_max
            && self.a_cap > 0.0;
        if !ok {
            return Err(Error::Config(
                "probe plan needs per_cell > 0, t samples, 0 < d_min < r0 < big_r0 < d_max and a_cap > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeRegion {
    Near,
    Intermediate,
    Far,
}

impl ProbeRegion {
    pub fn name(&self) -> &'static str {
        match self {
            ProbeRegion::Near => "near",
            ProbeRegion::Intermediate => "intermediate",
            ProbeRegion::Far => "far",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SignProbe {
    pub region: ProbeRegion,
    pub t: f64,
    pub d: f64,
    pub x: Vec<f64>,
    pub u: f64,
    /// Found by local search rather than placed on the lattice.
    pub refined: bool,
    sup: ResidualParts,
    sub: ResidualParts,
    fd: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualRow {
    pub region: ProbeRegion,
    pub t: f64,
    pub d: f64,
    pub family: &'static str,
    pub residual_cf: f64,
    pub residual_fd: f64,
    /// `|R_fd − R_cf| / (|∂_t w| + |Δw| + |w|^p)`; NaN without an FD value.
    pub rel_gap: f64,
    pub u_value: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegionExtrema {
    pub region: ProbeRegion,
    pub super_min: f64,
    pub super_max: f64,
    pub sub_min: f64,
    pub sub_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub rows: Vec<ResidualRow>,
    pub extrema: Vec<RegionExtrema>,
    /// Smallest `Ã ≥ A` passing every probe; `None` when the cap was hit.
    pub a_tilde_min: Option<f64>,
    pub a_initial: f64,
    /// Largest `d` below which every probe passes already at `Ã = A`.
    pub r0_empirical: f64,
    /// Smallest `d` beyond which absorption dominates diffusion in both
    /// residuals at the minimal `Ã`.
    pub big_r0_empirical: f64,
    pub max_rel_gap: f64,
    pub fd_checked: usize,
    pub flagged: usize,
    pub sandwich_ok: bool,
    /// Probes with the largest sign violation at the cap, when failing.
    pub worst: Vec<(ProbeRegion, f64, f64, f64)>,
}

impl ResidualReport {
    pub fn passed(&self) -> bool {
        self.a_tilde_min.is_some() && self.sandwich_ok
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<String>> = self.rows.iter().map(|r| {
            vec![
                r.region.name().to_string(),
                fmt_f64(r.t),
                fmt_f64(r.d),
                r.family.to_string(),
                fmt_f64(r.residual_cf),
                fmt_f64(r.residual_fd),
                fmt_f64(r.rel_gap),
                fmt_f64(r.u_value),
            ]
        }).collect();
        write_csv(path, &["region", "t", "d", "family", "residual_cf", "residual_fd", "rel_gap", "u_value"], &rows)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        match self.a_tilde_min {
            Some(a) => writeln!(s, "minimal A~ = {a:.6e} (A = {})", self.a_initial).unwrap(),
            None => writeln!(s, "no passing A~ below the cap (A = {})", self.a_initial).unwrap(),
        }
        writeln!(s, "empirical r0 = {:.4e}, R0 = {:.4e}", self.r0_empirical, self.big_r0_empirical).unwrap();
        for e in &self.extrema {
            writeln!(
                s,
                "{:>12}: super residual in [{:.3e}, {:.3e}], sub residual in [{:.3e}, {:.3e}]",
                e.region.name(),
                e.super_min,
                e.super_max,
                e.sub_min,
                e.sub_max
            )
            .unwrap();
        }
        writeln!(s, "fd check: {} residuals, max relative gap {:.3e}", self.fd_checked, self.max_rel_gap).unwrap();
        writeln!(s, "flagged probes: {}, sandwich: {}", self.flagged, if self.sandwich_ok { "ok" } else { "VIOLATED" })
            .unwrap();
        for (r, t, d, v) in &self.worst {
            writeln!(s, "  worst: region {} t = {t} d = {d:.4e} violation {v:.3e}", r.name()).unwrap();
        }
        s
    }
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    mm: &MovingManifold,
    lower: f64,
    pair: (&ComparisonSolution, &ComparisonSolution),
    region: ProbeRegion,
    t: f64,
    x: Vec<f64>,
    cfg: &QuadratureConfig,
    fd_check: bool,
    refined: bool,
) -> Result<Option<SignProbe>> {
    let ev = match eval_u(mm, lower, &x, t, cfg) {
        Ok(ev) => ev,
        Err(Error::NonFinite(_)) | Err(Error::Singularity { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let (sup, sub) = pair;
    let ps = ResidualParts::new(sup, &ev);
    let pb = ResidualParts::new(sub, &ev);
    if ![ps.diffusion, ps.poly, pb.diffusion, pb.poly].iter().all(|v| v.is_finite()) {
        return Ok(None);
    }
    let fd = if fd_check {
        let st = FdStencil::new(mm, lower, &x, t, ev.distance, cfg)?;
        Some((st.residual(sup).value, st.residual(sub).value))
    } else {
        None
    };
    Ok(Some(SignProbe { region, t, d: ev.distance, x, u: ev.value, refined, sup: ps, sub: pb, fd }))
}

/// Smallest `Ã ≥ a_init` passing this probe alone; infinite above `cap`.
fn required_a_tilde(p: &SignProbe, sup: &ComparisonSolution, sub: &ComparisonSolution, a_init: f64, cap: f64) -> f64 {
    minimal_a_tilde(std::slice::from_ref(p), sup, sub, a_init, cap).unwrap_or(f64::INFINITY)
}

/// Compass search in ambient coordinates maximising the offset a single
/// probe demands, confined to `d_min ≤ d ≤ d_max`.
fn refine_probe(
    mm: &MovingManifold,
    lower: f64,
    pair: (&ComparisonSolution, &ComparisonSolution),
    start: &SignProbe,
    plan: &ProbePlan,
    a_init: f64,
    cfg: &QuadratureConfig,
) -> Result<Option<SignProbe>> {
    const MAX_EVALS: usize = 400;
    let (sup, sub) = pair;
    let mut best_req = required_a_tilde(start, sup, sub, a_init, plan.a_cap);
    if !(best_req > a_init) || !best_req.is_finite() {
        return Ok(None);
    }
    let mut best = start.clone();
    let mut step = 0.25 * start.d;
    let floor = 1e-5 * start.d;
    let mut evals = 0;
    while evals < MAX_EVALS && step > floor {
        let mut improved = false;
        'axes: for i in 0..best.x.len() {
            for sgn in [1.0, -1.0] {
                let mut x = best.x.clone();
                x[i] += sgn * step;
                evals += 1;
                let Some(p) = evaluate(mm, lower, pair, start.region, start.t, x, cfg, false, true)? else { continue };
                if p.d < plan.d_min || p.d > plan.d_max {
                    continue;
                }
                let req = required_a_tilde(&p, sup, sub, a_init, plan.a_cap);
                if req > best_req {
                    best_req = req;
                    best = SignProbe { region: plan.region_of(p.d), ..p };
                    improved = true;
                    break 'axes;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    if !best.refined {
        return Ok(None);
    }
    if plan.fd_check {
        return evaluate(mm, lower, pair, best.region, best.t, best.x, cfg, true, true);
    }
    Ok(Some(best))
}

/// Probes `x = ξ + dν` with log-spaced `d` in each region, random foot
/// points on the first component and random unit normals, plus the
/// locally refined neighbours of the most demanding lattice probes.
pub fn sign_probes(
    mm: &MovingManifold,
    lower: f64,
    pair: (&ComparisonSolution, &ComparisonSolution),
    a_initial: f64,
    plan: &ProbePlan,
    cfg: &QuadratureConfig,
    seed: u64,
) -> Result<(Vec<SignProbe>, usize)> {
    plan.validate()?;
    mm.check_codimension()?;
    if plan.t_samples.iter().any(|&t| t <= lower) {
        return Err(Error::domain("probe times must exceed T̲"));
    }
    let (m0, motion) = mm.component(0);
    let axes = m0.axes();
    let mut rng = stream(seed, 0xc0a7);
    let cells = [
        (ProbeRegion::Near, plan.d_min, plan.r0),
        (ProbeRegion::Intermediate, plan.r0, plan.big_r0),
        (ProbeRegion::Far, plan.big_r0, plan.d_max),
    ];
    let mut raw = Vec::new();
    for &t in &plan.t_samples {
        let snap = motion.snapshot(t);
        for (region, lo, hi) in cells {
            for k in 0..plan.per_cell {
                let offset = lo * (hi / lo).powf((k as f64 + 0.5) / plan.per_cell as f64);
                let theta: Vec<f64> = axes
                    .iter()
                    .map(|ax| if ax.lo.is_finite() { rng.gen_range(ax.lo..ax.hi) } else { rng.gen_range(-1.0..1.0) })
                    .collect();
                let j = moved_jet(m0, &snap, &theta, false);
                let nu = random_normal(&mut rng, &j.d1);
                let x: Vec<f64> = j.point.iter().zip(&nu).map(|(p, v)| p + offset * v).collect();
                raw.push((region, t, x));
            }
        }
    }
    let evaluated: Vec<Result<Option<SignProbe>>> =
        raw.into_par_iter().map(|(region, t, x)| evaluate(mm, lower, pair, region, t, x, cfg, plan.fd_check, false)).collect();
    let mut probes = Vec::new();
    let mut flagged = 0;
    for r in evaluated {
        match r? {
            Some(p) => probes.push(p),
            None => flagged += 1,
        }
    }
    let (sup, sub) = pair;
    let mut seeds = Vec::new();
    for &t in &plan.t_samples {
        let mut at_t: Vec<(f64, &SignProbe)> = probes
            .iter()
            .filter(|p| p.t == t)
            .map(|p| (required_a_tilde(p, sup, sub, a_initial, plan.a_cap), p))
            .filter(|(r, _)| *r > a_initial && r.is_finite())
            .collect();
        at_t.sort_by(|a, b| b.0.total_cmp(&a.0));
        seeds.extend(at_t.into_iter().take(plan.refine).map(|(_, p)| p.clone()));
    }
    let refined: Vec<Result<Option<SignProbe>>> =
        seeds.par_iter().map(|p| refine_probe(mm, lower, pair, p, plan, a_initial, cfg)).collect();
    for r in refined {
        if let Some(p) = r? {
            probes.push(p);
        }
    }
    Ok((probes, flagged))
}

fn violation(p: &SignProbe, sup: &ComparisonSolution, sub: &ComparisonSolution, a: f64) -> f64 {
    let rs = p.sup.residual(sup, a);
    let rb = p.sub.residual(sub, a);
    (-rs).max(rb).max(0.0)
}

fn all_pass(probes: &[SignProbe], sup: &ComparisonSolution, sub: &ComparisonSolution, a: f64) -> bool {
    probes.iter().all(|p| p.sup.residual(sup, a) >= 0.0 && p.sub.residual(sub, a) <= 0.0)
}

/// Smallest `Ã ≥ a_init` for which the super residual is `≥ 0` and the sub
/// residual `≤ 0` on every probe: doubling to bracket, then bisection.
/// Each residual is monotone in `Ã` in its sign-relevant direction, so the
/// pass predicate is monotone.
pub fn minimal_a_tilde(
    probes: &[SignProbe],
    sup: &ComparisonSolution,
    sub: &ComparisonSolution,
    a_init: f64,
    cap: f64,
) -> Option<f64> {
    if all_pass(probes, sup, sub, a_init) {
        return Some(a_init);
    }
    let mut lo = a_init;
    let mut hi = a_init.max(1e-3) * 2.0;
    while !all_pass(probes, sup, sub, hi) {
        if hi > cap {
            return None;
        }
        lo = hi;
        hi *= 2.0;
    }
    if hi > cap {
        hi = cap;
        if !all_pass(probes, sup, sub, hi) {
            return None;
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if all_pass(probes, sup, sub, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Evaluates both members of a comparison pair on the probe lattice and
/// finds the minimal passing `Ã`.
pub fn verify_signs(
    mm: &MovingManifold,
    lower: f64,
    pair: (&ComparisonSolution, &ComparisonSolution),
    a_initial: f64,
    plan: &ProbePlan,
    cfg: &QuadratureConfig,
    seed: u64,
) -> Result<ResidualReport> {
    let (sup, sub) = pair;
    if sup.family.is_super() == sub.family.is_super() || !sup.family.is_super() {
        return Err(Error::Config("verify_signs expects a (super, sub) pair".into()));
    }
    if !(a_initial >= 0.0) {
        return Err(Error::Config(format!("initial-data tolerance A = {a_initial} must be >= 0")));
    }
    let (mut probes, flagged) = sign_probes(mm, lower, pair, a_initial, plan, cfg, seed)?;
    probes.sort_by(|a, b| (a.region, a.t).partial_cmp(&(b.region, b.t)).unwrap().then(a.d.total_cmp(&b.d)));
    Ok(report_from_probes(&probes, flagged, sup, sub, a_initial, plan.a_cap))
}

pub(crate) fn report_from_probes(
    probes: &[SignProbe],
    flagged: usize,
    sup: &ComparisonSolution,
    sub: &ComparisonSolution,
    a_initial: f64,
    cap: f64,
) -> ResidualReport {
    let a_min = minimal_a_tilde(probes, sup, sub, a_initial, cap);
    let a_eval = a_min.unwrap_or(cap);
    let mut rows = Vec::with_capacity(2 * probes.len());
    let mut max_rel_gap: f64 = 0.0;
    let mut fd_checked = 0;
    let mut sandwich_ok = true;
    for p in probes {
        for (family, sol, parts, fd) in
            [("super", sup, &p.sup, p.fd.map(|f| f.0)), ("sub", sub, &p.sub, p.fd.map(|f| f.1))]
        {
            let cf = parts.residual(sol, a_eval);
            let (fd_val, gap) = match fd {
                Some(v) => {
                    // the FD residual was taken at the pair's own offset; move it to a_eval
                    let shifted = v - absorption(parts.poly + sol.offset(), sol.p)
                        + absorption(parts.poly + sol.offset_sign * a_eval, sol.p);
                    // relative to the size of the residual's terms: at binding
                    // probes the residual itself vanishes by construction
                    let scale = parts.scale(sol, a_eval);
                    let checked = scale > 0.0;
                    let gap = if checked { (shifted - cf).abs() / scale } else { f64::NAN };
                    if checked {
                        fd_checked += 1;
                        max_rel_gap = max_rel_gap.max(gap);
                    }
                    (shifted, gap)
                }
                None => (f64::NAN, f64::NAN),
            };
            rows.push(ResidualRow {
                region: p.region,
                t: p.t,
                d: p.d,
                family,
                residual_cf: cf,
                residual_fd: fd_val,
                rel_gap: gap,
                u_value: parts.poly + sol.offset_sign * a_eval,
            });
        }
        if p.sub.poly - a_eval > p.sup.poly + a_eval {
            sandwich_ok = false;
        }
    }
    let extrema = [ProbeRegion::Near, ProbeRegion::Intermediate, ProbeRegion::Far]
        .iter()
        .filter_map(|&region| {
            let sel: Vec<&SignProbe> = probes.iter().filter(|p| p.region == region).collect();
            if sel.is_empty() {
                return None;
            }
            let s: Vec<f64> = sel.iter().map(|p| p.sup.residual(sup, a_eval)).collect();
            let b: Vec<f64> = sel.iter().map(|p| p.sub.residual(sub, a_eval)).collect();
            Some(RegionExtrema {
                region,
                super_min: s.iter().cloned().fold(f64::INFINITY, f64::min),
                super_max: s.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                sub_min: b.iter().cloned().fold(f64::INFINITY, f64::min),
                sub_max: b.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            })
        })
        .collect();
    let mut by_d: Vec<&SignProbe> = probes.iter().collect();
    by_d.sort_by(|a, b| a.d.total_cmp(&b.d));
    let mut r0_empirical = f64::NAN;
    for p in &by_d {
        if violation(p, sup, sub, a_initial) > 0.0 {
            break;
        }
        r0_empirical = p.d;
    }
    let mut big_r0_empirical = f64::NAN;
    for p in by_d.iter().rev() {
        let dominated = [(&p.sup, sup), (&p.sub, sub)].iter().all(|(parts, sol)| {
            parts.diffusion.abs() <= absorption(parts.poly + sol.offset_sign * a_eval, sol.p).abs()
        });
        if !dominated {
            break;
        }
        big_r0_empirical = p.d;
    }
    let worst = if a_min.is_none() {
        let mut v: Vec<(ProbeRegion, f64, f64, f64)> =
            probes.iter().map(|p| (p.region, p.t, p.d, violation(p, sup, sub, cap))).collect();
        v.sort_by(|a, b| b.3.total_cmp(&a.3));
        v.truncate(5);
        v
    } else {
        Vec::new()
    };
    ResidualReport {
        rows,
        extrema,
        a_tilde_min: a_min,
        a_initial,
        r0_empirical,
        big_r0_empirical,
        max_rel_gap,
        fd_checked,
        flagged,
        sandwich_ok,
        worst,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialClass {
    /// `|v − cU(·,0)| ≤ A`
    Weak { c: f64, a: f64 },
    /// `|v − LU(·,0)^β| ≤ A`
    Strong { l: f64, beta: f64, a: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Membership {
    pub member: bool,
    /// Supremum of the defining deviation over the samples.
    pub measured_a: f64,
    pub samples: usize,
}

/// Measures the class deviation of `u0` on samples `(x, U(x, 0))`.
pub fn classify_initial_data(
    u0: impl Fn(&[f64]) -> f64,
    class: &InitialClass,
    samples: &[(Vec<f64>, f64)],
) -> Membership {
    let (reference, declared): (Box<dyn Fn(f64) -> f64>, f64) = match *class {
        InitialClass::Weak { c, a } => (Box::new(move |u| c * u), a),
        InitialClass::Strong { l, beta, a } => (Box::new(move |u| l * u.powf(beta)), a),
    };
    let measured_a = samples.iter().map(|(x, u)| (u0(x) - reference(*u)).abs()).fold(0.0, f64::max);
    Membership { member: measured_a <= declared, measured_a, samples: samples.len() }
}

/// Points off `M_0` paired with `U(·, 0)`, at log-spaced distances in
/// `[d_min, d_max]` along random normals.
pub fn initial_samples(
    mm: &MovingManifold,
    lower: f64,
    count: usize,
    d_range: (f64, f64),
    cfg: &QuadratureConfig,
    seed: u64,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let (lo, hi) = d_range;
    if !(lo > 0.0 && hi > lo) || count == 0 {
        return Err(Error::Config("initial samples need 0 < d_min < d_max and count > 0".into()));
    }
    let (m0, motion) = mm.component(0);
    let axes = m0.axes();
    let snap = motion.snapshot(0.0);
    let mut rng = stream(seed, 0x1417);
    let pts: Vec<Vec<f64>> = (0..count)
        .map(|k| {
            let d = lo * (hi / lo).powf((k as f64 + 0.5) / count as f64);
            let th: Vec<f64> = axes
                .iter()
                .map(|ax| if ax.lo.is_finite() { rng.gen_range(ax.lo..ax.hi) } else { rng.gen_range(-1.0..1.0) })
                .collect();
            let j = moved_jet(m0, &snap, &th, false);
            let nu = random_normal(&mut rng, &j.d1);
            j.point.iter().zip(&nu).map(|(p, v)| p + d * v).collect()
        })
        .collect();
    pts.into_par_iter().map(|x| eval_u(mm, lower, &x, 0.0, cfg).map(|ev| (x, ev.value))).collect()
}
