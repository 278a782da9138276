//! Surface quadrature on `M_t`: uniform rules for smooth integrands and
//! foot-centred graded panels for peaked kernels.

use std::f64::consts::PI;

use super::manifold::{area_element, MovingManifold, ParametricManifold, Shape};
use super::motion::MotionSnapshot;
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, graded_offsets};

/// Uniform rule on a compact base manifold, moved to any time on demand.
#[derive(Debug, Clone)]
pub struct SurfaceQuadrature {
    pub params: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub base_points: Vec<Vec<f64>>,
    pub base_tangents: Vec<Vec<Vec<f64>>>,
    /// Area Jacobians `Jψ` of the base parametrization at the nodes.
    pub base_jacobians: Vec<f64>,
    pub level: usize,
}

impl SurfaceQuadrature {
    /// Periodic trapezoid with `level` nodes per periodic axis; Gauss–Legendre
    /// with `level / 2` nodes on the latitude axis of a sphere.
    pub fn uniform(m: &ParametricManifold, level: usize) -> Result<Self> {
        if !m.is_compact() {
            return Err(Error::domain("uniform surface quadrature needs a compact manifold"));
        }
        let level = level.max(4);
        let mut params = Vec::new();
        let mut weights = Vec::new();
        let trap = |k: usize| -> (f64, f64) { (2.0 * PI * k as f64 / level as f64, 2.0 * PI / level as f64) };
        match m.shape {
            Shape::Circle { .. } => {
                for k in 0..level {
                    let (th, w) = trap(k);
                    params.push(vec![th]);
                    weights.push(w);
                }
            }
            Shape::Torus { .. } => {
                for a in 0..level {
                    for b in 0..level {
                        let (pa, wa) = trap(a);
                        let (pb, wb) = trap(b);
                        params.push(vec![pa, pb]);
                        weights.push(wa * wb);
                    }
                }
            }
            Shape::Sphere { .. } => {
                let gl = crate::quadrature::GaussLegendre::new((level / 2).max(4));
                for (lat, wl) in gl.on(-0.5 * PI, 0.5 * PI) {
                    for b in 0..level {
                        let (pb, wb) = trap(b);
                        params.push(vec![lat, pb]);
                        weights.push(wl * wb);
                    }
                }
            }
            Shape::FlatPlane { .. } => unreachable!(),
        }
        let mut base_points = Vec::with_capacity(params.len());
        let mut base_tangents = Vec::with_capacity(params.len());
        let mut base_jacobians = Vec::with_capacity(params.len());
        for th in &params {
            let j = m.jet_with(th, false);
            base_jacobians.push(area_element(&j.d1));
            base_points.push(j.point);
            base_tangents.push(j.d1);
        }
        Ok(SurfaceQuadrature { params, weights, base_points, base_tangents, base_jacobians, level })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Moved nodes `F_t(ψ(θ_k))` with weights `w_k · J(F_t∘ψ)(θ_k)`.
    pub fn moved(&self, snap: &MotionSnapshot<'_>) -> Vec<(Vec<f64>, f64)> {
        if snap.is_identity() {
            return self
                .base_points
                .iter()
                .zip(self.weights.iter().zip(&self.base_jacobians))
                .map(|(p, (w, j))| (p.clone(), w * j))
                .collect();
        }
        let n = self.base_points.first().map_or(0, |p| p.len());
        self.base_points
            .iter()
            .zip(&self.base_tangents)
            .zip(&self.weights)
            .map(|((p, tang), w)| {
                let mut x = vec![0.0; n];
                snap.apply_into(p, &mut x);
                let pushed: Vec<Vec<f64>> = tang
                    .iter()
                    .map(|v| {
                        let mut o = vec![0.0; n];
                        snap.push_vector(p, v, &mut o);
                        o
                    })
                    .collect();
                (x, w * area_element(&pushed))
            })
            .collect()
    }
}

/// `∫_{M_t} f dH^m` summed over components, one rule per component.
pub fn surface_integral(
    mm: &MovingManifold,
    t: f64,
    quads: &[SurfaceQuadrature],
    mut f: impl FnMut(&[f64]) -> f64,
) -> Result<f64> {
    if quads.len() != mm.n_components() {
        return Err(Error::domain("one surface rule per component is required"));
    }
    let mut acc = 0.0;
    for (k, q) in quads.iter().enumerate() {
        let (_, fam) = mm.component(k);
        fam.check_time(t)?;
        for (x, w) in q.moved(&fam.snapshot(t)) {
            let v = f(&x);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("surface node {x:?} at t = {t}")));
            }
            acc += w * v;
        }
    }
    Ok(acc)
}

/// Sampled per-axis parameter speeds `max |∂_a ψ|` of the base manifold.
pub fn parameter_speeds(m: &ParametricManifold) -> Vec<f64> {
    match m.shape {
        Shape::Circle { radius, .. } => vec![radius],
        Shape::Sphere { radius } => vec![radius, radius],
        Shape::Torus { major, minor } => vec![major + minor, minor],
        Shape::FlatPlane { dim } => vec![1.0; dim],
    }
}

/// Graded panels on one parameter axis centred at `center`: first panel
/// width `first` on each side, doubling outward, reaching `extent` on
/// each side (periodic axes use half the period).
pub fn centred_panels(center: f64, first: f64, extent: f64) -> Vec<(f64, f64)> {
    let offs = graded_offsets(first, extent, 2.0);
    let mut out = Vec::with_capacity(2 * offs.len());
    for w in offs.windows(2).rev() {
        out.push((center - w[1], center - w[0]));
    }
    for w in offs.windows(2) {
        out.push((center + w[0], center + w[1]));
    }
    out
}

/// Quadrature cell: parameter box and tensor Gauss–Legendre nodes.
#[derive(Debug, Clone)]
pub struct Cell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Cell {
    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Half-length of the ambient displacement bound across the cell.
    pub fn reach(&self, speeds: &[f64]) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(speeds)
            .map(|((a, b), s)| 0.5 * (b - a) * s)
            .sum()
    }

    /// Tensor-product Gauss–Legendre nodes (params, weight) of `order`.
    pub fn nodes(&self, order: usize) -> Vec<(Vec<f64>, f64)> {
        let gl = gauss_legendre(order);
        match self.lo.len() {
            1 => gl.on(self.lo[0], self.hi[0]).map(|(x, w)| (vec![x], w)).collect(),
            2 => {
                let mut out = Vec::with_capacity(order * order);
                for (x, wx) in gl.on(self.lo[0], self.hi[0]) {
                    for (y, wy) in gl.on(self.lo[1], self.hi[1]) {
                        out.push((vec![x, y], wx * wy));
                    }
                }
                out
            }
            _ => {
                // tensor product over all axes
                let mut out = vec![(Vec::new(), 1.0)];
                for a in 0..self.lo.len() {
                    let mut next = Vec::new();
                    for (p, w) in &out {
                        for (x, wx) in gl.on(self.lo[a], self.hi[a]) {
                            let mut q: Vec<f64> = p.clone();
                            q.push(x);
                            next.push((q, w * wx));
                        }
                    }
                    out = next;
                }
                out
            }
        }
    }
}

/// Foot-centred graded cells covering the parameter domain of `m` (after
/// any recentring) for a kernel of ambient width `width`; `reach` bounds
/// the extent on non-compact axes.
pub fn graded_cells(m: &ParametricManifold, center: &[f64], width: f64, reach: f64) -> Vec<Cell> {
    let speeds = parameter_speeds(m);
    let axes = m.axes();
    let per_axis: Vec<Vec<(f64, f64)>> = axes
        .iter()
        .enumerate()
        .map(|(a, ax)| {
            let first = (width / speeds[a]).max(1e-14);
            if ax.periodic {
                let half = 0.5 * ax.length();
                centred_panels(center[a], first.min(half), half)
            } else if ax.lo.is_finite() {
                // bounded axis: grade inside [lo, hi] from the centre
                let mut out = Vec::new();
                let left = center[a] - ax.lo;
                let right = ax.hi - center[a];
                if left > 0.0 {
                    let offs = graded_offsets(first.min(left), left, 2.0);
                    for w in offs.windows(2).rev() {
                        out.push((center[a] - w[1], center[a] - w[0]));
                    }
                }
                if right > 0.0 {
                    let offs = graded_offsets(first.min(right), right, 2.0);
                    for w in offs.windows(2) {
                        out.push((center[a] + w[0], center[a] + w[1]));
                    }
                }
                out
            } else {
                let ext = (reach / speeds[a]).max(first);
                centred_panels(center[a], first.min(ext), ext)
            }
        })
        .collect();
    let mut cells = vec![Cell { lo: Vec::new(), hi: Vec::new() }];
    for axis in per_axis {
        let mut next = Vec::with_capacity(cells.len() * axis.len());
        for c in &cells {
            for &(a, b) in &axis {
                let mut lo = c.lo.clone();
                let mut hi = c.hi.clone();
                lo.push(a);
                hi.push(b);
                next.push(Cell { lo, hi });
            }
        }
        cells = next;
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{AffineMotion, MotionFamily, PlaneRotation, Profile};

    #[test]
    fn circle_length() {
        let m = ParametricManifold::circle(4, 1.0).unwrap();
        let mm = MovingManifold::static_manifold(m.clone(), -2.0);
        let q = SurfaceQuadrature::uniform(&m, 32).unwrap();
        let v = surface_integral(&mm, 0.0, &[q], |_| 1.0).unwrap();
        assert!((v - 2.0 * PI).abs() < 1e-12 * 2.0 * PI);
    }

    #[test]
    fn sphere_and_torus_areas() {
        let s = ParametricManifold::sphere(5, 1.5).unwrap();
        let q = SurfaceQuadrature::uniform(&s, 32).unwrap();
        let mm = MovingManifold::static_manifold(s.clone(), -2.0);
        let v = surface_integral(&mm, 0.0, &[q], |_| 1.0).unwrap();
        assert!((v / s.analytic_volume().unwrap() - 1.0).abs() < 1e-12);
        let t = ParametricManifold::torus(5, 2.0, 0.5).unwrap();
        let q = SurfaceQuadrature::uniform(&t, 32).unwrap();
        let mm = MovingManifold::static_manifold(t.clone(), -2.0);
        let v = surface_integral(&mm, 0.0, &[q], |_| 1.0).unwrap();
        assert!((v / t.analytic_volume().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaling_motion_scales_length() {
        let mot = AffineMotion {
            scale: Profile::Linear { rate: 0.1 },
            rotation: Some(PlaneRotation { plane: (0, 2), rate: 0.3 }),
            direction: vec![0.0; 4],
            shift: Profile::Zero,
        };
        let fam = MotionFamily::affine(4, mot, -2.0).unwrap();
        let m = ParametricManifold::circle(4, 1.0).unwrap();
        let mm = MovingManifold::new(m.clone(), fam).unwrap();
        let q = SurfaceQuadrature::uniform(&m, 64).unwrap();
        let v = surface_integral(&mm, 2.0, &[q], |_| 1.0).unwrap();
        assert!((v - 1.2 * 2.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn graded_cells_tile_the_domain() {
        let t = ParametricManifold::torus(5, 2.0, 0.5).unwrap();
        let cells = graded_cells(&t, &[0.3, 1.0], 1e-3, 1.0);
        let area: f64 = cells.iter().map(|c| (c.hi[0] - c.lo[0]) * (c.hi[1] - c.lo[1])).sum();
        assert!((area - 4.0 * PI * PI).abs() < 1e-10);
    }
}
