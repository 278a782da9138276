use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{eval_u, QuadratureConfig};
use crate::error::{Error, Result};
use crate::geometry::manifold::moved_jet;
use crate::geometry::{distance, MovingManifold};
use crate::output::{fmt_f64, write_csv};
use crate::rng::{random_normal, stream};
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanPlan {
    pub t_samples: Vec<f64>,
    /// Distances inside the certified tube.
    pub near: Vec<f64>,
    pub intermediate: Vec<f64>,
    pub far: Vec<f64>,
    /// Foot points sampled per (t, d).
    pub feet: usize,
    /// Normal directions per foot point.
    pub directions: usize,
    /// Far probes use a horizon of at least this multiple of `d²`.
    pub far_horizon_factor: f64,
}

impl Default for ScanPlan {
    fn default() -> Self {
        ScanPlan {
            t_samples: vec![0.0, 1.0, 10.0, 100.0],
            near: vec![0.01, 0.02, 0.04],
            intermediate: vec![0.25, 0.5, 1.0, 2.0],
            far: vec![5.0, 10.0, 20.0, 40.0],
            feet: 2,
            directions: 2,
            far_horizon_factor: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Near,
    Intermediate,
    Far,
}

impl Region {
    pub fn name(&self) -> &'static str {
        match self {
            Region::Near => "near",
            Region::Intermediate => "intermediate",
            Region::Far => "far",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsRow {
    pub region: Region,
    pub t: f64,
    /// Requested offset along the normal.
    pub offset: f64,
    /// Actual `d(x, M_t)`.
    pub d: f64,
    pub nu_index: usize,
    /// `t − T̲` used for this probe.
    pub horizon: f64,
    pub u: f64,
    pub grad_norm: f64,
    pub d_pow_u: f64,
    pub d_pow_grad: f64,
    pub heat_residual: f64,
    pub laplacian: f64,
    pub quad_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsReport {
    pub codim: usize,
    pub rows: Vec<AsymptoticsRow>,
    pub skipped: usize,
    /// `max |d^{N−2}U − 1| / (d log(1/d))` per near distance.
    pub correction_constants: Vec<(f64, f64)>,
    /// Worst two-sided constant `max(d^{N−2}U, 1/(d^{N−2}U))` on near probes.
    pub two_sided_constant: f64,
    /// Least-squares slope of `log U` against `log d` on far probes whose
    /// horizon is at least `far_horizon_factor · d²`; NaN when none is.
    pub far_slope: f64,
    /// Far probes entering the slope fit.
    pub far_fitted: usize,
    /// `(min U, max U)` over intermediate probes.
    pub intermediate_bounds: (f64, f64),
    /// Per near distance: relative spread over `t` of the mean `d^{N−2}U`.
    pub uniformity: Vec<(f64, f64)>,
    pub max_heat_residual: f64,
}

impl AsymptoticsReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header = [
            "region", "t", "d", "horizon", "nu_index", "U", "dU_norm", "d_pow_U", "d_pow_gradU", "heat_residual", "quad_err",
        ];
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.region.name().to_string(),
                    fmt_f64(r.t),
                    fmt_f64(r.d),
                    fmt_f64(r.horizon),
                    r.nu_index.to_string(),
                    fmt_f64(r.u),
                    fmt_f64(r.grad_norm),
                    fmt_f64(r.d_pow_u),
                    fmt_f64(r.d_pow_grad),
                    fmt_f64(r.heat_residual),
                    fmt_f64(r.quad_err),
                ]
            })
            .collect();
        write_csv(path, &header, &rows)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("codimension N = {}\n", self.codim));
        s.push_str(&format!("probes = {}, skipped = {}\n", self.rows.len(), self.skipped));
        for (d, c) in &self.correction_constants {
            s.push_str(&format!("correction constant at d = {d}: C = {c:.6}\n"));
        }
        s.push_str(&format!("two-sided near constant = {:.6}\n", self.two_sided_constant));
        if self.far_fitted > 0 {
            s.push_str(&format!("far-field slope = {:.6} ({} probes)\n", self.far_slope, self.far_fitted));
        } else {
            s.push_str("far-field slope: no far probe has a horizon of far_horizon_factor · d²\n");
        }
        s.push_str(&format!(
            "intermediate bounds = [{:.6e}, {:.6e}]\n",
            self.intermediate_bounds.0, self.intermediate_bounds.1
        ));
        for (d, sp) in &self.uniformity {
            s.push_str(&format!("spread over t at d = {d}: {sp:.3e}\n"));
        }
        s.push_str(&format!("max heat residual = {:.3e}\n", self.max_heat_residual));
        s
    }
}

struct Probe {
    region: Region,
    t: f64,
    offset: f64,
    nu_index: usize,
    x: Vec<f64>,
    foot: Vec<f64>,
    lower: f64,
}

/// Probes `x = ξ + d ν` at random foot points `ξ ∈ M_t` and random unit
/// normals `ν`, evaluated in parallel.
pub fn asymptotics_scan(
    mm: &MovingManifold,
    lower: f64,
    plan: &ScanPlan,
    cfg: &QuadratureConfig,
    seed: u64,
) -> Result<AsymptoticsReport> {
    mm.check_codimension()?;
    if plan.t_samples.iter().any(|&t| t <= lower) {
        return Err(Error::domain("scan times must exceed T̲"));
    }
    let n = mm.ambient();
    let codim = mm.codim();
    let nf = codim as f64;
    let mut rng = stream(seed, 0x5ca7);
    let (m0, _) = mm.component(0);
    let axes = m0.axes();
    let mut probes = Vec::new();
    let regions = [(Region::Near, &plan.near), (Region::Intermediate, &plan.intermediate), (Region::Far, &plan.far)];
    for &t in &plan.t_samples {
        for (region, ladder) in regions {
            for &d in ladder.iter() {
                for _ in 0..plan.feet {
                    let th: Vec<f64> = axes
                        .iter()
                        .map(|ax| if ax.lo.is_finite() { rng.gen_range(ax.lo..ax.hi) } else { rng.gen_range(-1.0..1.0) })
                        .collect();
                    let snap = mm.motion.snapshot(t);
                    let j = moved_jet(m0, &snap, &th, false);
                    for nu_index in 0..plan.directions {
                        let nu = random_normal(&mut rng, &j.d1);
                        let x: Vec<f64> = j.point.iter().zip(&nu).map(|(p, v)| p + d * v).collect();
                        // a moving manifold cannot be continued before its lower time
                        let far_lower = if region == Region::Far && mm.is_static() {
                            lower.min(t - plan.far_horizon_factor * d.max(1.0).powi(2))
                        } else {
                            lower
                        };
                        probes.push(Probe { region, t, offset: d, nu_index, x, foot: j.point.clone(), lower: far_lower });
                    }
                }
            }
        }
    }
    let results: Vec<Result<Option<AsymptoticsRow>>> = probes
        .par_iter()
        .map(|p| {
            let near = distance(mm, &p.x, p.t, None)?;
            if p.region != Region::Far {
                // the foot must be the generating point, else another sheet is closer
                let moved = crate::geometry::motion::dist(&near.foot, &p.foot);
                if moved > 1e-6 * (1.0 + p.offset) || (near.distance - p.offset).abs() > 1e-8 * (1.0 + p.offset) {
                    return Ok(None);
                }
            }
            let ev = eval_u(mm, p.lower, &p.x, p.t, cfg)?;
            let d = ev.distance;
            let lap = ev.laplacian();
            Ok(Some(AsymptoticsRow {
                region: p.region,
                t: p.t,
                offset: p.offset,
                d,
                nu_index: p.nu_index,
                horizon: p.t - p.lower,
                u: ev.value,
                grad_norm: ev.grad_norm(),
                d_pow_u: d.powf(nf - 2.0) * ev.value,
                d_pow_grad: d.powf(nf - 1.0) * ev.grad_norm(),
                heat_residual: ev.heat_residual().abs() / (1.0 + lap.abs()),
                laplacian: lap,
                quad_err: ev.quad_err,
            }))
        })
        .collect();
    let mut rows = Vec::new();
    let mut skipped = 0;
    for r in results {
        match r? {
            Some(row) => rows.push(row),
            None => skipped += 1,
        }
    }
    let _ = n;
    Ok(summarize(codim, rows, skipped, plan))
}

fn summarize(codim: usize, rows: Vec<AsymptoticsRow>, skipped: usize, plan: &ScanPlan) -> AsymptoticsReport {
    let near: Vec<&AsymptoticsRow> = rows.iter().filter(|r| r.region == Region::Near).collect();
    let correction_constants = plan
        .near
        .iter()
        .map(|&d| {
            let c = near
                .iter()
                .filter(|r| r.offset == d)
                .map(|r| (r.d_pow_u - 1.0).abs() / (r.d * (1.0 / r.d).ln()))
                .fold(0.0, f64::max);
            (d, c)
        })
        .collect();
    let two_sided_constant = near.iter().map(|r| r.d_pow_u.max(1.0 / r.d_pow_u)).fold(1.0, f64::max);
    let far: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.region == Region::Far && r.horizon >= plan.far_horizon_factor * r.d * r.d)
        .map(|r| (r.d.ln(), r.u.ln()))
        .collect();
    let far_slope = if far.len() >= 2 { least_squares_slope(&far) } else { f64::NAN };
    let inter: Vec<f64> = rows.iter().filter(|r| r.region == Region::Intermediate).map(|r| r.u).collect();
    let intermediate_bounds = (
        inter.iter().cloned().fold(f64::INFINITY, f64::min),
        inter.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let uniformity = plan
        .near
        .iter()
        .map(|&d| {
            let means: Vec<f64> = plan
                .t_samples
                .iter()
                .filter_map(|&t| {
                    let v: Vec<f64> = near.iter().filter(|r| r.offset == d && r.t == t).map(|r| r.d_pow_u).collect();
                    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
                })
                .collect();
            let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
            let mid = 0.5 * (hi + lo);
            (d, if means.is_empty() { f64::NAN } else { (hi - lo) / mid })
        })
        .collect();
    let max_heat_residual = rows.iter().map(|r| r.heat_residual).fold(0.0, f64::max);
    AsymptoticsReport {
        codim,
        rows,
        skipped,
        correction_constants,
        two_sided_constant,
        far_slope,
        far_fitted: far.len(),
        intermediate_bounds,
        uniformity,
        max_heat_residual,
    }
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return f64::NAN;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
