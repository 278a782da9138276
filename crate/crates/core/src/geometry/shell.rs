//! `∫_{M_t^{δ,δ'}} d(x, M_t)^β dx` in tubular coordinates, with the
//! two-sided bounds in terms of `B`, `K` and `H^m(M_0)`.

use serde::Serialize;

use super::bounds::GeometryBounds;
use super::manifold::{moved_jet, normal_basis, orthonormalize, MovingManifold};
use super::surface::SurfaceQuadrature;
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, geometric_panels};
use crate::special::unit_ball_volume;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShellIntegral {
    pub value: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

/// Smooth orthonormal normal frame near a reference frame: project the
/// reference normals onto the local normal space, then re-orthonormalize.
pub(crate) fn local_normals(tangents: &[Vec<f64>], reference: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let t = orthonormalize(tangents);
    let projected: Vec<Vec<f64>> = reference
        .iter()
        .map(|v| {
            let mut w = v.clone();
            for b in &t {
                let d: f64 = b.iter().zip(&w).map(|(x, y)| x * y).sum();
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= d * bi;
                }
            }
            w
        })
        .collect();
    orthonormalize(&projected)
}

/// Tubular-coordinate data at one surface node: `ψ_t` and the local normal
/// frame at the node and at `±h` along each parameter axis.
pub(crate) struct TubeNode {
    pub point: Vec<f64>,
    pub normals: Vec<Vec<f64>>,
    /// `(ψ(y+h e_a), ν(y+h e_a), ψ(y−h e_a), ν(y−h e_a))` per axis.
    shifted: Vec<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>)>,
    h: f64,
}

impl TubeNode {
    pub(crate) fn new(mm: &MovingManifold, c: usize, th: &[f64], t: f64, h: f64) -> Self {
        let (m, f) = mm.component(c);
        let snap = f.snapshot(t);
        let n = m.ambient;
        let j = moved_jet(m, &snap, th, false);
        let normals = normal_basis(&j.d1, n);
        let shifted = (0..th.len())
            .map(|a| {
                let mut tp = th.to_vec();
                let mut tm = th.to_vec();
                tp[a] += h;
                tm[a] -= h;
                let jp = moved_jet(m, &snap, &tp, false);
                let jm = moved_jet(m, &snap, &tm, false);
                let np = local_normals(&jp.d1, &normals);
                let nm = local_normals(&jm.d1, &normals);
                (jp.point, np, jm.point, nm)
            })
            .collect();
        TubeNode { point: j.point, normals, shifted, h }
    }

    /// `Θ(y, ξ) = ψ(y) + Σ ξ_i ν_i(y)` at the node.
    pub(crate) fn theta(&self, xi: &[f64]) -> Vec<f64> {
        combine(&self.point, &self.normals, xi)
    }

    /// `|det DΘ(y, ξ)|` by central differences.
    pub(crate) fn jacobian(&self, xi: &[f64]) -> f64 {
        let n = self.point.len();
        let dm = self.shifted.len();
        let mut d = nalgebra::DMatrix::zeros(n, n);
        for (a, (pp, np, pm, nm)) in self.shifted.iter().enumerate() {
            let plus = combine(pp, np, xi);
            let minus = combine(pm, nm, xi);
            for i in 0..n {
                d[(i, a)] = (plus[i] - minus[i]) / (2.0 * self.h);
            }
        }
        for (k, _) in self.normals.iter().enumerate() {
            let mut xp = xi.to_vec();
            let mut xm = xi.to_vec();
            xp[k] += self.h;
            xm[k] -= self.h;
            let plus = self.theta(&xp);
            let minus = self.theta(&xm);
            for i in 0..n {
                d[(i, dm + k)] = (plus[i] - minus[i]) / (2.0 * self.h);
            }
        }
        d.determinant().abs()
    }
}

fn combine(p: &[f64], normals: &[Vec<f64>], xi: &[f64]) -> Vec<f64> {
    let mut out = p.to_vec();
    for (k, nu) in normals.iter().enumerate() {
        for i in 0..out.len() {
            out[i] += xi[k] * nu[i];
        }
    }
    out
}

/// `∫_a^b r^{γ−1} dr`.
fn power_integral(gamma: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if gamma.abs() < 1e-14 {
        (b / a).ln()
    } else {
        (b.powf(gamma) - a.powf(gamma)) / gamma
    }
}

/// Two-sided bounds on the shell integral.
pub fn shell_bounds(bounds: &GeometryBounds, n: usize, m: usize, delta: f64, delta_p: f64, beta: f64) -> (f64, f64) {
    let b = bounds.b;
    let al = bounds.alpha_l;
    let s = (1.0 + al * al).sqrt();
    let codim = n - m;
    let nw = codim as f64 * unit_ball_volume(codim);
    let nf = n as f64;
    let mf = m as f64;
    let g = beta + codim as f64;
    let c_lo = b.powf(-mf)
        * bounds.vol
        * nw
        * (1.0 / (b * 2.0 * 2f64.sqrt())).powf(0.5 * nf)
        / (b.powf(mf) * (1.0 + al * al).powf(0.5 * mf))
        * (b * s).powf(beta).min(b.powf(-beta));
    let mu = 5.0 * b.powi(10) * (1.0 + al * al).powi(3) * bounds.k * bounds.k * delta * delta
        + 5.0 * b * b * (1.0 + 2.0 * al * al);
    let c_hi = b.powf(mf) * bounds.vol * nw * mu.powf(0.5 * nf) * b.powf(mf) * (b * s).powf(beta).max(b.powf(-beta));
    let lower = c_lo * power_integral(g, delta_p * b, delta / (b * s));
    let upper = c_hi * power_integral(g, delta_p / (b * s), b * delta);
    (lower, upper)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShellResolution {
    /// Uniform surface rule level.
    pub surface: usize,
    /// Gauss–Legendre order per radial panel (panels grow by 2×).
    pub radial_order: usize,
}

impl Default for ShellResolution {
    fn default() -> Self {
        ShellResolution { surface: 64, radial_order: 16 }
    }
}

/// Shell integral over `δ' < d(x, M_t) < δ` for `δ ≤ δ_tube`.
pub fn shell_integral(
    mm: &MovingManifold,
    t: f64,
    delta: f64,
    delta_p: f64,
    beta: f64,
    bounds: &GeometryBounds,
    res: &ShellResolution,
) -> Result<ShellIntegral> {
    if !(delta > 0.0) || delta > bounds.delta_tube {
        return Err(Error::domain(format!("shell radius {delta} must lie in (0, δ_tube = {}]", bounds.delta_tube)));
    }
    let s = (1.0 + bounds.alpha_l * bounds.alpha_l).sqrt();
    if !(delta_p > 0.0) || delta_p >= delta / (bounds.b * bounds.b * s) {
        return Err(Error::domain(format!("inner radius {delta_p} violates δ' < δ/(B²√(1+α²))")));
    }
    let n = mm.ambient();
    let codim = mm.codim();
    let gl = gauss_legendre(res.radial_order);
    // cross-polytope directions integrate polynomials of degree <= 3 on the sphere exactly
    let w_dir = codim as f64 * unit_ball_volume(codim) / (2 * codim) as f64;
    let h = 1e-5 * delta;
    let radial = geometric_panels(delta_p, delta, delta, 2.0);
    let mut value = 0.0;
    for c in 0..mm.n_components() {
        let (m, f) = mm.component(c);
        f.check_time(t)?;
        let q = SurfaceQuadrature::uniform(m, res.surface)?;
        for (th, wy) in q.params.iter().zip(&q.weights) {
            let node = TubeNode::new(mm, c, th, t, h);
            let mut acc = 0.0;
            for &(a, b) in &radial {
                for (r, wr) in gl.on(a, b) {
                    let rad = r.powf(beta + codim as f64 - 1.0);
                    for k in 0..codim {
                        for sign in [1.0, -1.0] {
                            let mut xi = vec![0.0; codim];
                            xi[k] = sign * r;
                            acc += wr * rad * node.jacobian(&xi);
                        }
                    }
                }
            }
            value += wy * w_dir * acc;
        }
    }
    let (lower_bound, upper_bound) = shell_bounds(bounds, n, mm.dim(), delta, delta_p, beta);
    Ok(ShellIntegral { value, lower_bound, upper_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ParametricManifold;
    use std::f64::consts::PI;

    #[test]
    fn circle_tube_volume_is_weyl() {
        let mm = MovingManifold::static_manifold(ParametricManifold::circle(4, 1.0).unwrap(), -2.0);
        let b = GeometryBounds::from_constants(1.0, 1.0, PI / 2.0, 2.2, 2.0 * PI);
        let d = 0.02;
        let r = shell_integral(&mm, 0.0, d, 1e-9, 0.0, &b, &ShellResolution::default()).unwrap();
        let exact = 2.0 * PI * 4.0 * PI / 3.0 * (d * d * d - 1e-27);
        assert!((r.value / exact - 1.0).abs() < 1e-8, "{} vs {exact}", r.value);
        assert!(r.lower_bound <= r.value && r.value <= r.upper_bound);
    }
}
