//! Nearest-point projection onto `M_t`.

use serde::Serialize;

use super::manifold::{dot, moved_jet, MovingManifold, ParametricManifold};
use super::motion::{dist, MotionSnapshot};
use crate::error::Result;

#[derive(Debug, Clone, Serialize)]
pub struct NearestPointResult {
    pub foot: Vec<f64>,
    pub distance: f64,
    pub param: Vec<f64>,
    pub component: usize,
    /// `d < δ_tube`: the foot point is certified unique.
    pub unique: bool,
    /// Newton failed from every start; the answer came from dense sampling.
    pub reduced_accuracy: bool,
    /// Distance of the best local minimum with a different foot point.
    pub runner_up: Option<f64>,
}

impl NearestPointResult {
    /// Unit normal `(x − foot)/d`, `None` on `M_t`.
    pub fn normal(&self, x: &[f64]) -> Option<Vec<f64>> {
        if self.distance == 0.0 {
            return None;
        }
        Some(x.iter().zip(&self.foot).map(|(a, b)| (a - b) / self.distance).collect())
    }
}

struct LocalMin {
    param: Vec<f64>,
    foot: Vec<f64>,
    d: f64,
    converged: bool,
}

const MAX_NEWTON: usize = 60;

/// Damped Newton on `|ψ_t(θ) − x|²` from `start`.
fn newton(m: &ParametricManifold, snap: &MotionSnapshot<'_>, x: &[f64], start: &[f64]) -> LocalMin {
    let dm = m.dim();
    let mut th = start.to_vec();
    let objective = |th: &[f64]| {
        let j = moved_jet(m, snap, th, false);
        let d2: f64 = j.point.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        (d2, j)
    };
    let mut converged = false;
    for _ in 0..MAX_NEWTON {
        let j = moved_jet(m, snap, &th, true);
        let r: Vec<f64> = j.point.iter().zip(x).map(|(a, b)| a - b).collect();
        let f0 = dot(&r, &r);
        let d = f0.sqrt();
        let g: Vec<f64> = (0..dm).map(|a| dot(&r, &j.d1[a])).collect();
        // tangential residual: projection of (x − ξ) on the tangent space
        let tang = (0..dm)
            .map(|a| g[a] * g[a] / dot(&j.d1[a], &j.d1[a]).max(1e-300))
            .sum::<f64>()
            .sqrt();
        if tang <= 1e-12 * (1.0 + d) {
            converged = true;
            break;
        }
        let mut h = vec![vec![0.0; dm]; dm];
        for a in 0..dm {
            for b in 0..dm {
                h[a][b] = dot(&j.d1[a], &j.d1[b]) + dot(&r, &j.d2[a][b]);
            }
        }
        let step = match solve_small(&h, &g) {
            Some(s) if is_descent(&h, &g, &s) => s.iter().map(|v| -v).collect::<Vec<_>>(),
            _ => (0..dm).map(|a| -g[a] / dot(&j.d1[a], &j.d1[a]).max(1e-300)).collect(),
        };
        // backtracking keeps the objective nonincreasing
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = th.iter().zip(&step).map(|(a, s)| a + lam * s).collect();
            let (f1, _) = objective(&trial);
            if f1 <= f0 {
                th = trial;
                accepted = true;
                break;
            }
            lam *= 0.5;
        }
        m.wrap(&mut th);
        if !accepted {
            // roundoff floor reached
            converged = tang <= 1e-8 * (1.0 + d);
            break;
        }
    }
    let (d2, j) = objective(&th);
    LocalMin { param: th, foot: j.point, d: d2.sqrt(), converged }
}

fn is_descent(h: &[Vec<f64>], g: &[f64], s: &[f64]) -> bool {
    // positive-definite Hessian along the step
    let hs: f64 = (0..g.len()).map(|a| s[a] * (0..g.len()).map(|b| h[a][b] * s[b]).sum::<f64>()).sum();
    hs > 0.0 && dot(g, s) > 0.0
}

fn solve_small(h: &[Vec<f64>], g: &[f64]) -> Option<Vec<f64>> {
    match g.len() {
        1 => (h[0][0] > 0.0).then(|| vec![g[0] / h[0][0]]),
        2 => {
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            if det <= 0.0 || h[0][0] <= 0.0 {
                return None;
            }
            Some(vec![
                (h[1][1] * g[0] - h[0][1] * g[1]) / det,
                (h[0][0] * g[1] - h[1][0] * g[0]) / det,
            ])
        }
        k => {
            let hm = nalgebra::DMatrix::from_fn(k, k, |i, j| h[i][j]);
            let chol = hm.cholesky()?;
            let s = chol.solve(&nalgebra::DVector::from_column_slice(g));
            Some(s.as_slice().to_vec())
        }
    }
}

fn starts_for(m: &ParametricManifold) -> usize {
    match m.dim() {
        1 => 8,
        _ => 8, // 8 × 4 = 32 starts on two-parameter surfaces
    }
}

fn dense_params(m: &ParametricManifold, budget: usize) -> Vec<Vec<f64>> {
    match m.dim() {
        1 => m.start_params(budget),
        _ => m.start_params((2.0 * budget as f64).sqrt() as usize),
    }
}

/// Global nearest point on one component (all local minima returned sorted).
fn component_minima(m: &ParametricManifold, snap: &MotionSnapshot<'_>, x: &[f64]) -> (Vec<LocalMin>, bool) {
    let mut mins: Vec<LocalMin> = Vec::new();
    let starts = m.start_params(starts_for(m));
    for s in &starts {
        let lm = newton(m, snap, x, s);
        if lm.converged {
            mins.push(lm);
        }
    }
    let mut reduced = false;
    if mins.is_empty() {
        reduced = true;
        let mut best: Option<(f64, Vec<f64>)> = None;
        for th in dense_params(m, 4096) {
            let j = moved_jet(m, snap, &th, false);
            let d = dist(&j.point, x);
            if best.as_ref().is_none_or(|b| d < b.0) {
                best = Some((d, th));
            }
        }
        let (_, th) = best.expect("dense sample nonempty");
        let lm = newton(m, snap, x, &th);
        mins.push(lm);
    }
    mins.sort_by(|a, b| a.d.total_cmp(&b.d));
    (mins, reduced)
}

/// Nearest point on one component: local Newton from `start` when given,
/// falling back to the global multistart search.
pub fn component_nearest(
    m: &ParametricManifold,
    snap: &MotionSnapshot<'_>,
    x: &[f64],
    start: Option<&[f64]>,
) -> (Vec<f64>, Vec<f64>, f64) {
    if let Some(s) = start {
        let lm = newton(m, snap, x, s);
        if lm.converged {
            return (lm.param, lm.foot, lm.d);
        }
    }
    let (mut mins, _) = component_minima(m, snap, x);
    let lm = mins.swap_remove(0);
    (lm.param, lm.foot, lm.d)
}

/// `d(x, M_t)` with foot point; `tube` is the certified radius `δ_tube`.
pub fn distance(mm: &MovingManifold, x: &[f64], t: f64, tube: Option<f64>) -> Result<NearestPointResult> {
    let mut all: Vec<(usize, LocalMin)> = Vec::new();
    let mut reduced = false;
    for k in 0..mm.n_components() {
        let (m, f) = mm.component(k);
        f.check_time(t)?;
        let snap = f.snapshot(t);
        let (mins, red) = component_minima(m, &snap, x);
        reduced |= red;
        all.extend(mins.into_iter().map(|lm| (k, lm)));
    }
    all.sort_by(|a, b| a.1.d.total_cmp(&b.1.d));
    let (k, best) = all.swap_remove(0);
    if best.d <= 1e-14 * (1.0 + x.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
        return Ok(NearestPointResult {
            foot: x.to_vec(),
            distance: 0.0,
            param: best.param,
            component: k,
            unique: false,
            reduced_accuracy: reduced,
            runner_up: None,
        });
    }
    let sep = 1e-6 * (1.0 + best.d);
    let runner_up = all
        .iter()
        .filter(|(_, lm)| dist(&lm.foot, &best.foot) > sep)
        .map(|(_, lm)| lm.d)
        .next();
    let unique = match tube {
        Some(delta) => best.d < delta,
        None => false,
    };
    Ok(NearestPointResult {
        foot: best.foot,
        distance: best.d,
        param: best.param,
        component: k,
        unique,
        reduced_accuracy: reduced,
        runner_up,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MotionFamily, ParametricManifold};

    #[test]
    fn circle_closed_form() {
        let mm = MovingManifold::static_manifold(ParametricManifold::circle(4, 1.0).unwrap(), -2.0);
        let r = distance(&mm, &[1.5, 0.0, 0.3, 0.0], 0.0, Some(0.6)).unwrap();
        assert!((r.distance - 0.34f64.sqrt()).abs() < 1e-13);
        assert!(r.unique);
        let r = distance(&mm, &[0.0, 0.0, 0.3, 0.4], 0.0, Some(0.02)).unwrap();
        assert!((r.distance - 1.25f64.sqrt()).abs() < 1e-13);
        assert!(!r.unique);
    }

    #[test]
    fn on_manifold_gives_zero() {
        let mm = MovingManifold::static_manifold(ParametricManifold::circle(4, 1.0).unwrap(), -2.0);
        let r = distance(&mm, &[0.6, 0.8, 0.0, 0.0], 0.0, None).unwrap();
        assert_eq!(r.distance, 0.0);
    }

    #[test]
    fn sphere_and_moving_circle() {
        let mm = MovingManifold::static_manifold(ParametricManifold::sphere(5, 2.0).unwrap(), -2.0);
        let r = distance(&mm, &[0.3, -0.2, 3.0, 0.5, 0.1], 0.0, None).unwrap();
        let rho = (0.09f64 + 0.04 + 9.0).sqrt();
        assert!((r.distance - ((rho - 2.0).powi(2) + 0.26).sqrt()).abs() < 1e-12);

        let drift = crate::geometry::AffineMotion::translation(
            vec![0.0, 0.0, 1.0, 0.0],
            crate::geometry::Profile::SqrtDrift { offset: 4.0 },
        );
        let fam = MotionFamily::affine(4, drift, -2.0).unwrap();
        let mm = MovingManifold::new(ParametricManifold::circle(4, 1.0).unwrap(), fam).unwrap();
        let r = distance(&mm, &[1.2, 0.0, 1.0, 0.0], 5.0, None).unwrap();
        assert!((r.distance - 0.2).abs() < 1e-12);
    }
}
