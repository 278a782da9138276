//! Langer charts: `M_t` as a graph `y ↦ x + E_x (y, h(y))` over its tangent plane.

use nalgebra::{DMatrix, DVector};

use super::manifold::{moved_jet, normal_basis, orthonormalize, MovingManifold, ParametricManifold};
use super::motion::MotionFamily;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LangerChart {
    pub center: Vec<f64>,
    /// Columns: tangent basis, then normal basis.
    pub frame: DMatrix<f64>,
    pub frame_inv: DMatrix<f64>,
    pub radius: f64,
    pub center_param: Vec<f64>,
    manifold: ParametricManifold,
    motion: MotionFamily,
    t: f64,
}

/// Height function value with first and second derivatives.
#[derive(Debug, Clone)]
pub struct HeightJet {
    pub h: DVector<f64>,
    /// `(n−m) × m`
    pub dh: DMatrix<f64>,
    /// `d2h[i]` is the `m × m` Hessian of component `i`.
    pub d2h: Vec<DMatrix<f64>>,
    pub param: Vec<f64>,
}

impl HeightJet {
    /// Operator norm of `Dh`.
    pub fn slope(&self) -> f64 {
        self.dh.clone().singular_values().max()
    }
}

/// Chart of component `c` of `M_t` centred at `F_t(ψ(θ₀))`. The frame is
/// orthonormal on `M_0` and transported by `DF_t`.
pub fn langer_chart(mm: &MovingManifold, c: usize, t: f64, theta0: &[f64], radius: f64) -> Result<LangerChart> {
    let (m, f) = mm.component(c);
    f.check_time(t)?;
    let n = m.ambient;
    let dm = m.dim();
    let base = m.jet_with(theta0, false);
    let tang = orthonormalize(&base.d1);
    if tang.len() != dm {
        return Err(Error::domain("parametrization is not an immersion at the chart centre"));
    }
    let nor = normal_basis(&base.d1, n);
    let mut e0 = DMatrix::zeros(n, n);
    for (k, v) in tang.iter().chain(nor.iter()).enumerate() {
        for i in 0..n {
            e0[(i, k)] = v[i];
        }
    }
    let frame = f.jacobian(&base.point, t) * e0;
    let frame_inv = frame
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Internal("transported frame is singular".into()))?;
    let center = mm.point(c, theta0, t);
    Ok(LangerChart {
        center,
        frame,
        frame_inv,
        radius,
        center_param: theta0.to_vec(),
        manifold: m.clone(),
        motion: f.clone(),
        t,
    })
}

impl LangerChart {
    fn dim(&self) -> usize {
        self.manifold.dim()
    }

    /// Frame coordinates `E⁻¹(p − x)` of a point.
    pub fn coords(&self, p: &[f64]) -> DVector<f64> {
        let v = DVector::from_iterator(p.len(), p.iter().zip(&self.center).map(|(a, b)| a - b));
        &self.frame_inv * v
    }

    /// Parameter `θ` with tangential frame coordinates `y`, by Newton from
    /// `start` (or the centre).
    pub fn param_of(&self, y: &[f64], start: Option<&[f64]>) -> Result<Vec<f64>> {
        let dm = self.dim();
        let snap = self.motion.snapshot(self.t);
        let mut th = start.map_or_else(|| self.center_param.clone(), |s| s.to_vec());
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for _ in 0..50 {
            let j = moved_jet(&self.manifold, &snap, &th, false);
            let c = self.coords(&j.point);
            let r = DVector::from_iterator(dm, (0..dm).map(|a| c[a] - y[a]));
            if r.norm() < 1e-14 * (1.0 + ynorm) {
                return Ok(th);
            }
            let jac = DMatrix::from_fn(dm, dm, |a, b| {
                let v = DVector::from_column_slice(&j.d1[b]);
                (self.frame_inv.row(a) * v)[0]
            });
            let step = jac
                .lu()
                .solve(&r)
                .ok_or_else(|| Error::Internal("chart Newton hit a singular Jacobian".into()))?;
            for a in 0..dm {
                th[a] -= step[a];
            }
        }
        Err(Error::Internal(format!("chart Newton failed at y = {y:?}")))
    }

    /// `h(y)` with derivatives; `Dh` by implicit differentiation, `D²h` by
    /// central differences of `Dh`.
    pub fn height(&self, y: &[f64]) -> Result<HeightJet> {
        let (h, dh, param) = self.height_first(y, None)?;
        let dm = self.dim();
        let step = 1e-5 * self.radius.max(1e-3);
        let mut d2h = vec![DMatrix::zeros(dm, dm); h.len()];
        for a in 0..dm {
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[a] += step;
            ym[a] -= step;
            let (_, dp, _) = self.height_first(&yp, Some(&param))?;
            let (_, dmn, _) = self.height_first(&ym, Some(&param))?;
            for i in 0..h.len() {
                for b in 0..dm {
                    d2h[i][(b, a)] = (dp[(i, b)] - dmn[(i, b)]) / (2.0 * step);
                }
            }
        }
        Ok(HeightJet { h, dh, d2h, param })
    }

    fn height_first(&self, y: &[f64], start: Option<&[f64]>) -> Result<(DVector<f64>, DMatrix<f64>, Vec<f64>)> {
        let dm = self.dim();
        let n = self.manifold.ambient;
        let th = self.param_of(y, start)?;
        let snap = self.motion.snapshot(self.t);
        let j = moved_jet(&self.manifold, &snap, &th, false);
        let c = self.coords(&j.point);
        let h = DVector::from_iterator(n - dm, (dm..n).map(|i| c[i]));
        let dpsi = DMatrix::from_fn(n, dm, |i, a| j.d1[a][i]);
        let g = &self.frame_inv * dpsi;
        let gt = g.rows(0, dm).into_owned();
        let gn = g.rows(dm, n - dm).into_owned();
        let inv = gt
            .try_inverse()
            .ok_or_else(|| Error::Internal("chart is not a graph here".into()))?;
        Ok((h, gn * inv, th))
    }

    /// `x + E (y, h(y))`.
    pub fn reconstruct(&self, y: &[f64], h: &DVector<f64>) -> Vec<f64> {
        let n = self.manifold.ambient;
        let dm = self.dim();
        let v = DVector::from_iterator(n, (0..n).map(|i| if i < dm { y[i] } else { h[i - dm] }));
        let p = &self.frame * v;
        p.iter().zip(&self.center).map(|(a, b)| a + b).collect()
    }

    /// Manifold point of a parameter.
    pub fn manifold_point(&self, th: &[f64]) -> Vec<f64> {
        let mut o = vec![0.0; self.manifold.ambient];
        self.motion.snapshot(self.t).apply_into(&self.manifold.point(th), &mut o);
        o
    }
}
