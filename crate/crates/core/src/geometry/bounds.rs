//! Sampled geometric constants: curvature bound `K`, embedding constant
//! `κ`, diameter, motion bound `B`, Langer radius and certified tube radius.

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use serde::Serialize;

use super::manifold::{dot, moved_jet, Jet, MovingManifold, ParametricManifold};
use super::motion::{dist, validate_motion, MotionSnapshot};
use super::surface::SurfaceQuadrature;
use crate::error::{Error, Result};

/// Safety factor applied to sampled sups that enter tube radii.
pub const INFLATION: f64 = 1.1;

/// Langer slope bound `α_L`.
pub const ALPHA_L: f64 = 1.0;

/// `|II|` at one point: Frobenius norm of the normal part of `D²ψ` taken
/// with the inverse metric.
pub fn second_fundamental_norm(j: &Jet) -> f64 {
    let m = j.d1.len();
    let n = j.point.len();
    let g = nalgebra::DMatrix::from_fn(m, m, |a, b| dot(&j.d1[a], &j.d1[b]));
    let ginv = match g.clone().try_inverse() {
        Some(gi) => gi,
        None => return f64::INFINITY,
    };
    // normal projection of each D²ψ entry
    let proj = |v: &Vec<f64>| -> Vec<f64> {
        let mut coef = vec![0.0; m];
        for a in 0..m {
            for b in 0..m {
                coef[a] += ginv[(a, b)] * dot(&j.d1[b], v);
            }
        }
        let mut out = v.clone();
        for a in 0..m {
            for i in 0..n {
                out[i] -= coef[a] * j.d1[a][i];
            }
        }
        out
    };
    let ii: Vec<Vec<Vec<f64>>> = j.d2.iter().map(|row| row.iter().map(proj).collect()).collect();
    let mut acc = 0.0;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in 0..m {
                    acc += ginv[(a, c)] * ginv[(b, d)] * dot(&ii[a][b], &ii[c][d]);
                }
            }
        }
    }
    acc.max(0.0).sqrt()
}

fn sample_params(m: &ParametricManifold, per_axis: usize) -> Vec<Vec<f64>> {
    if m.is_compact() {
        m.start_params(per_axis)
    } else {
        let k = per_axis.max(2);
        (0..k).map(|i| vec![-1.0 + 2.0 * i as f64 / (k - 1) as f64; m.dim()]).collect()
    }
}

/// Sampled `sup |II|` over the base manifold, inflated by [`INFLATION`].
pub fn curvature_bound(m: &ParametricManifold, per_axis: usize) -> f64 {
    let snap = MotionSnapshot::Identity;
    curvature_sup(m, &snap, per_axis) * INFLATION
}

fn curvature_sup(m: &ParametricManifold, snap: &MotionSnapshot<'_>, per_axis: usize) -> f64 {
    sample_params(m, per_axis)
        .iter()
        .map(|th| second_fundamental_norm(&moved_jet(m, snap, th, true)))
        .fold(0.0, f64::max)
}

/// Sampled `sup_t sup |II_{M_t}|` over the given times, inflated.
pub fn curvature_bound_moving(mm: &MovingManifold, times: &[f64], per_axis: usize) -> f64 {
    let mut k: f64 = 0.0;
    for c in 0..mm.n_components() {
        let (m, f) = mm.component(c);
        for &t in times {
            k = k.max(curvature_sup(m, &f.snapshot(t), per_axis));
        }
    }
    k * INFLATION
}

/// Embedding constant `κ = sup d_g(p,q)/|p−q|` of component `c` of `M_t`,
/// with geodesic distances from all-pairs shortest paths on a parameter
/// mesh whose edges carry chord lengths.
pub fn embedding_constant_at(mm: &MovingManifold, c: usize, t: f64, mesh_level: usize) -> Result<f64> {
    let (m, f) = mm.component(c);
    if !m.is_compact() {
        return Err(Error::domain("embedding constant needs a compact manifold"));
    }
    let snap = f.snapshot(t);
    let axes = m.axes();
    let mut graph = UnGraph::<(), f64>::new_undirected();
    let mut pts: Vec<Vec<f64>> = Vec::new();
    let idx: Vec<NodeIndex>;
    let point = |th: &[f64]| {
        let p = m.point(th);
        let mut o = vec![0.0; p.len()];
        snap.apply_into(&p, &mut o);
        o
    };
    match axes.len() {
        1 => {
            let k = mesh_level.max(3);
            for i in 0..k {
                pts.push(point(&[axes[0].lo + axes[0].length() * i as f64 / k as f64]));
            }
            idx = (0..k).map(|_| graph.add_node(())).collect();
            for i in 0..k {
                let j = (i + 1) % k;
                graph.add_edge(idx[i], idx[j], dist(&pts[i], &pts[j]));
            }
        }
        2 => {
            let k0 = mesh_level.max(3);
            let k1 = if axes[1].periodic { mesh_level.max(3) } else { (mesh_level / 2).max(3) };
            let coord = |ax: &super::manifold::Axis, i: usize, k: usize| {
                if ax.periodic {
                    ax.lo + ax.length() * i as f64 / k as f64
                } else {
                    ax.lo + ax.length() * i as f64 / (k - 1) as f64
                }
            };
            for i in 0..k0 {
                for j in 0..k1 {
                    pts.push(point(&[coord(&axes[0], i, k0), coord(&axes[1], j, k1)]));
                }
            }
            idx = (0..k0 * k1).map(|_| graph.add_node(())).collect();
            let at = |i: usize, j: usize| i * k1 + j;
            for i in 0..k0 {
                for j in 0..k1 {
                    let neigh = [(1isize, 0isize), (0, 1), (1, 1), (1, -1)];
                    for (di, dj) in neigh {
                        let ni = i as isize + di;
                        let nj = j as isize + dj;
                        let ni = if axes[0].periodic { ni.rem_euclid(k0 as isize) } else { ni };
                        let nj = if axes[1].periodic { nj.rem_euclid(k1 as isize) } else { nj };
                        if ni < 0 || nj < 0 || ni >= k0 as isize || nj >= k1 as isize {
                            continue;
                        }
                        let (a, b) = (at(i, j), at(ni as usize, nj as usize));
                        if a != b {
                            graph.add_edge(idx[a], idx[b], dist(&pts[a], &pts[b]));
                        }
                    }
                }
            }
        }
        _ => return Err(Error::domain("embedding constant supports m <= 2")),
    }
    let mut kappa: f64 = 1.0;
    let scale = pts.iter().flat_map(|p| p.iter()).fold(0.0f64, |a, b| a.max(b.abs())).max(1.0);
    for (a, &src) in idx.iter().enumerate() {
        let paths = dijkstra(&graph, src, None, |e| *e.weight());
        if paths.len() != idx.len() {
            return Err(Error::domain("embedding mesh graph is disconnected"));
        }
        for (b, &dst) in idx.iter().enumerate() {
            let chord = dist(&pts[a], &pts[b]);
            if chord > 1e-9 * scale {
                kappa = kappa.max(paths[&dst] / chord);
            }
        }
    }
    Ok(kappa)
}

/// `κ(M_0)` of the base manifold.
pub fn embedding_constant(m: &ParametricManifold, mesh_level: usize) -> Result<f64> {
    let mm = MovingManifold::static_manifold(m.clone(), f64::NEG_INFINITY);
    embedding_constant_at(&mm, 0, 0.0, mesh_level)
}

/// Sampled `sup_t diam(M_t)` over the given times, inflated.
pub fn diameter(mm: &MovingManifold, times: &[f64], per_axis: usize) -> f64 {
    let mut d: f64 = 0.0;
    for &t in times {
        let pts: Vec<Vec<f64>> = (0..mm.n_components())
            .flat_map(|c| {
                let (m, _) = mm.component(c);
                sample_params(m, per_axis).into_iter().map(move |th| (c, th))
            })
            .map(|(c, th)| mm.point(c, &th, t))
            .collect();
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                d = d.max(dist(&pts[i], &pts[j]));
            }
        }
    }
    d * INFLATION
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometryBounds {
    pub b: f64,
    pub k: f64,
    pub kappa: f64,
    pub diam: f64,
    pub vol: f64,
    pub r_langer: f64,
    pub alpha_l: f64,
    pub delta_tube: f64,
}

/// `R = α_L (B²(1+α_L²))^{−3/2} K^{−1}`.
pub fn langer_radius(b: f64, k: f64, alpha_l: f64) -> f64 {
    alpha_l * (b * b * (1.0 + alpha_l * alpha_l)).powf(-1.5) / k
}

/// `δ_tube = min{B^{−6}K^{−1}/(2√2), B^{−7}K^{−1}κ^{−1}/25}`.
pub fn tube_radius(b: f64, k: f64, kappa: f64) -> f64 {
    let a = b.powi(-6) / (k * 2.0 * 2f64.sqrt());
    let c = b.powi(-7) / (k * kappa * 25.0);
    a.min(c)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsOptions {
    pub times: Vec<f64>,
    pub per_axis: usize,
    pub mesh_level: usize,
    pub holder_cap: f64,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        BoundsOptions { times: vec![0.0, 1.0, 10.0, 100.0], per_axis: 64, mesh_level: 256, holder_cap: 20.0 }
    }
}

impl GeometryBounds {
    /// Sampled estimates; `K` and the diameter are inflated, `B` and `κ` are not.
    pub fn estimate(mm: &MovingManifold, opts: &BoundsOptions) -> Result<Self> {
        if opts.times.is_empty() {
            return Err(Error::domain("bounds need at least one sample time"));
        }
        let mut b: f64 = 1.0;
        let mut kappa: f64 = 1.0;
        let mut vol = 0.0;
        for c in 0..mm.n_components() {
            let (m, f) = mm.component(c);
            let base: Vec<Vec<f64>> = sample_params(m, opts.per_axis.min(32)).iter().map(|th| m.point(th)).collect();
            let v = validate_motion(f, &opts.times, &base, opts.holder_cap)?;
            if !v.b_est.is_finite() {
                return Err(Error::Config(format!(
                    "motion bound failed: {}",
                    v.diagnostic.unwrap_or_default()
                )));
            }
            b = b.max(v.b_est);
            kappa = kappa.max(embedding_constant_at(mm, c, 0.0, opts.mesh_level)?);
            vol += match m.analytic_volume() {
                Some(v) => v,
                None => SurfaceQuadrature::uniform(m, 64).map(|q| q.weights.iter().zip(&q.base_jacobians).map(|(w, j)| w * j).sum())?,
            };
        }
        let k = curvature_bound_moving(mm, &opts.times, opts.per_axis);
        let diam = diameter(mm, &opts.times, opts.per_axis.min(64));
        Ok(Self::from_constants(b, k, kappa, diam, vol))
    }

    pub fn from_constants(b: f64, k: f64, kappa: f64, diam: f64, vol: f64) -> Self {
        let k_eff = k.max(1e-300);
        GeometryBounds {
            b,
            k,
            kappa,
            diam,
            vol,
            r_langer: langer_radius(b, k_eff, ALPHA_L),
            alpha_l: ALPHA_L,
            delta_tube: tube_radius(b, k_eff, kappa),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curvature_of_standard_shapes() {
        let c = ParametricManifold::circle(4, 2.0).unwrap();
        assert!((curvature_bound(&c, 32) / INFLATION - 0.5).abs() < 1e-12);
        let s = ParametricManifold::sphere(5, 2.0).unwrap();
        assert!((curvature_bound(&s, 16) / INFLATION - 2f64.sqrt() / 2.0).abs() < 1e-10);
        let f = ParametricManifold::flat(4, 1).unwrap();
        assert_eq!(curvature_bound(&f, 8), 0.0);
    }

    #[test]
    fn tube_radius_formula() {
        let d = tube_radius(1.0, 1.0, std::f64::consts::FRAC_PI_2);
        assert!((d - 2.0 / (25.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert!((tube_radius(1.0, 2.0, 1.5) * 2.0 - tube_radius(1.0, 1.0, 1.5)).abs() < 1e-15);
    }
}
