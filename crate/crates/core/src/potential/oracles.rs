use serde::Serialize;

use super::{c_norm, eval_u, QuadratureConfig};
use crate::error::{Error, Result};
use crate::geometry::distance::component_nearest;
use crate::geometry::manifold::norm;
use crate::geometry::surface::graded_cells;
use crate::geometry::{area_element, MotionSnapshot, MovingManifold, ParametricManifold, Shape};
use crate::special::{gamma, gamma_q};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlatOracle {
    pub u: f64,
    pub grad_norm: f64,
}

/// `U` and `|∇U|` for a static flat `m`-plane of codimension `N` at distance
/// `d`; `horizon = ∞` gives `d^{−(N−2)}` and `(N−2) d^{−(N−1)}`.
pub fn flat_plane_oracle(d: f64, codim: usize, horizon: f64) -> Result<FlatOracle> {
    if !(d > 0.0) {
        return Err(Error::domain("flat_plane_oracle needs d > 0"));
    }
    c_norm(codim)?;
    let nf = codim as f64;
    let a = 0.5 * (nf - 2.0);
    if horizon.is_infinite() {
        return Ok(FlatOracle { u: d.powf(2.0 - nf), grad_norm: (nf - 2.0) * d.powf(1.0 - nf) });
    }
    let z = d * d / (4.0 * horizon);
    let q = gamma_q(a, z);
    let u = d.powf(2.0 - nf) * q;
    // dQ(a, z)/dz = −z^{a−1} e^{−z} / Γ(a)
    let dq = -(z.powf(a - 1.0) * (-z).exp()) / gamma(a);
    let du = (2.0 - nf) * d.powf(1.0 - nf) * q + d.powf(2.0 - nf) * dq * d / (2.0 * horizon);
    Ok(FlatOracle { u, grad_norm: du.abs() })
}

/// Worst relative error of `eval_u` on a static flat `m`-plane in `R^n`
/// against [`flat_plane_oracle`], over distances `ds` and horizons.
pub fn flat_selftest(n: usize, m: usize, ds: &[f64], horizons: &[f64], cfg: &QuadratureConfig) -> Result<f64> {
    let plane = ParametricManifold::flat(n, m)?;
    let mut worst: f64 = 0.0;
    for &h in horizons {
        let mm = MovingManifold::static_manifold(plane.clone(), -h);
        for &d in ds {
            let mut x = vec![0.0; n];
            x[n - 1] = d;
            let got = eval_u(&mm, -h, &x, 0.0, cfg)?.value;
            let want = flat_plane_oracle(d, n - m, h)?.u;
            worst = worst.max((got - want).abs() / want.abs());
        }
    }
    Ok(worst)
}

/// `(c_n/c_N) ∫_M |x−ξ|^{2−n} Q(n/2−1, |x−ξ|²/4H) dH^m(ξ)`: the potential of
/// a static manifold with horizon `H` (`Q ≡ 1` for `H = ∞`), by foot-centred
/// graded Gauss–Legendre cells.
pub fn static_oracle(m: &ParametricManifold, x: &[f64], horizon: f64) -> Result<f64> {
    let n = m.ambient;
    let codim = m.codim();
    let ratio = c_norm(n)? / c_norm(codim)?;
    let (param, _, d) = component_nearest(m, &MotionSnapshot::Identity, x, None);
    if d < 1e-12 {
        return Err(Error::Singularity { distance: d });
    }
    // non-compact planes: the tail beyond 1e12·d is below 1e-12 relative
    let reach = if let Shape::FlatPlane { .. } = m.shape { 1e12 * d } else { f64::INFINITY };
    let (mr, center) = m.recentered(&param);
    let order = if mr.dim() == 1 { 32 } else { 16 };
    let mut acc = 0.0;
    let mut z = vec![0.0; n];
    for cell in graded_cells(&mr, &center, d, reach) {
        for (th, w) in cell.nodes(order) {
            let j = mr.jet_with(&th, false);
            for i in 0..n {
                z[i] = x[i] - j.point[i];
            }
            let r = norm(&z);
            let q = if horizon.is_finite() { gamma_q(0.5 * n as f64 - 1.0, r * r / (4.0 * horizon)) } else { 1.0 };
            acc += w * area_element(&j.d1) * r.powf(2.0 - n as f64) * q;
        }
    }
    Ok(ratio * acc)
}
