use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{c_norm, QuadratureConfig, TimeIntegration};
use crate::error::{Error, Result};
use crate::geometry::distance::component_nearest;
use crate::geometry::manifold::{moved_jet, norm};
use crate::geometry::surface::{graded_cells, parameter_speeds};
use crate::geometry::{area_element, distance, MotionSnapshot, MovingManifold, SurfaceQuadrature};
use crate::quadrature::{gauss_legendre, geometric_panels};
use crate::special::upper_gamma;

/// `U` with gradient, Hessian and time derivative at one space–time point.
#[derive(Debug, Clone)]
pub struct PotentialEval {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
    pub dt: f64,
    /// Panel-doubling difference; NaN when not requested.
    pub quad_err: f64,
    pub distance: f64,
    pub foot: Vec<f64>,
}

impl PotentialEval {
    pub fn grad_norm(&self) -> f64 {
        self.gradient.norm()
    }

    pub fn grad_norm_sq(&self) -> f64 {
        self.gradient.norm_squared()
    }

    pub fn laplacian(&self) -> f64 {
        self.hessian.trace()
    }

    /// `∂_tU − ΔU`.
    pub fn heat_residual(&self) -> f64 {
        self.dt - self.laplacian()
    }
}

struct Acc {
    n: usize,
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
    dt: f64,
}

impl Acc {
    fn new(n: usize) -> Self {
        Acc { n, value: 0.0, grad: vec![0.0; n], hess: vec![0.0; n * n], dt: 0.0 }
    }

    /// Adds `g · (1, ∇, ∇², ∂_τ)` of the Gaussian factor at offset `z`.
    fn add_gauss(&mut self, z: &[f64], tau: f64, g: f64) {
        let n = self.n;
        let inv = 0.5 / tau;
        let z2: f64 = z.iter().map(|v| v * v).sum();
        self.value += g;
        self.dt += (z2 * inv * inv - n as f64 * inv) * g;
        for i in 0..n {
            self.grad[i] -= z[i] * inv * g;
            let zi = z[i] * inv * inv * g;
            for j in i..n {
                self.hess[i * n + j] += zi * z[j];
            }
            self.hess[i * n + i] -= inv * g;
        }
    }

    /// Adds `w · (Φ, ∇Φ, ∇²Φ)` of a radial kernel with `Φ'`, `Φ''` given,
    /// plus `w · dt` to the time derivative.
    fn add_radial(&mut self, z: &[f64], r: f64, w: f64, phi: f64, d1: f64, d2: f64, dt: f64) {
        let n = self.n;
        self.value += w * phi;
        self.dt += w * dt;
        let q = d1 / r;
        let s = (d2 - q) / (r * r);
        for i in 0..n {
            self.grad[i] += w * q * z[i];
            for j in i..n {
                self.hess[i * n + j] += w * s * z[i] * z[j];
            }
            self.hess[i * n + i] += w * q;
        }
    }

    fn finish(self, scale: f64, distance: f64, foot: Vec<f64>) -> PotentialEval {
        let n = self.n;
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                h[(i, j)] = self.hess[i * n + j] * scale;
                h[(j, i)] = h[(i, j)];
            }
        }
        PotentialEval {
            value: self.value * scale,
            gradient: DVector::from_iterator(n, self.grad.iter().map(|g| g * scale)),
            hessian: h,
            dt: self.dt * scale,
            quad_err: f64::NAN,
            distance,
            foot,
        }
    }
}

/// Upper bound on the operator norm of `DF` near `p`.
fn snapshot_gain(snap: &MotionSnapshot<'_>, p: &[f64]) -> f64 {
    match snap {
        MotionSnapshot::Identity => 1.0,
        MotionSnapshot::Affine { a, .. } => {
            let n = a.nrows();
            let row = (0..n).map(|i| (0..n).map(|j| a[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max);
            let col = (0..n).map(|j| (0..n).map(|i| a[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max);
            (row * col).sqrt()
        }
        MotionSnapshot::Custom { .. } => 1.5 * snap.jacobian(p).norm(),
    }
}

/// `U(x, t; T̲)` for `x ∉ M_t`, `t > T̲`.
pub fn eval_u(mm: &MovingManifold, lower: f64, x: &[f64], t: f64, cfg: &QuadratureConfig) -> Result<PotentialEval> {
    cfg.validate()?;
    mm.check_codimension()?;
    let n = mm.ambient();
    if x.len() != n {
        return Err(Error::domain(format!("point has dimension {}, expected {n}", x.len())));
    }
    if !(t > lower) || !t.is_finite() {
        return Err(Error::domain(format!("need t > T̲, got t = {t}, T̲ = {lower}")));
    }
    // the identity motion is defined for all times
    if lower < mm.lower_time() && !mm.is_static() {
        return Err(Error::domain(format!(
            "T̲ = {lower} lies outside the motion interval starting at {}",
            mm.lower_time()
        )));
    }
    let near = distance(mm, x, t, None)?;
    if near.distance < cfg.min_distance {
        return Err(Error::Singularity { distance: near.distance });
    }
    let analytic = match cfg.time_integration {
        TimeIntegration::Auto => mm.is_static(),
        TimeIntegration::Panels => false,
        TimeIntegration::Analytic => {
            if !mm.is_static() {
                return Err(Error::Config("closed-form time integration needs a static manifold".into()));
            }
            true
        }
    };
    let scale = 1.0 / c_norm(mm.codim())?;
    let run = |c: &QuadratureConfig, order_shift: bool| -> Result<PotentialEval> {
        let acc = if analytic {
            static_closed_form(mm, t - lower, x, c, order_shift)
        } else {
            time_panels(mm, lower, x, t, c)
        };
        Ok(acc.finish(scale, near.distance, near.foot.clone()))
    };
    let mut out = run(cfg, false)?;
    if cfg.estimate_error {
        let fine = if analytic { run(cfg, true)? } else { run(&cfg.doubled(), false)? };
        out.quad_err = (fine.value - out.value).abs();
    }
    let finite = out.value.is_finite()
        && out.dt.is_finite()
        && out.gradient.iter().all(|v| v.is_finite())
        && out.hessian.iter().all(|v| v.is_finite());
    if !finite {
        return Err(Error::NonFinite(format!("U at x = {x:?}, t = {t}")));
    }
    Ok(out)
}

/// Static manifolds: `∫_0^H G dτ = r^{2−n} Γ(n/2 − 1, r²/4H) / (4π^{n/2})`,
/// then one surface integral.
fn static_closed_form(mm: &MovingManifold, horizon: f64, x: &[f64], cfg: &QuadratureConfig, refine: bool) -> Acc {
    let n = mm.ambient();
    let nf = n as f64;
    let a = 0.5 * nf - 1.0;
    let k = 1.0 / (4.0 * PI.powf(0.5 * nf));
    let e_pref = (4.0 * horizon).powf(1.0 - 0.5 * nf);
    let mut acc = Acc::new(n);
    let mut z = vec![0.0; n];
    for c in 0..mm.n_components() {
        let (m, _) = mm.component(c);
        let (param, _, d) = component_nearest(m, &MotionSnapshot::Identity, x, None);
        if d * d / (4.0 * horizon) > 700.0 {
            continue;
        }
        let (mr, center) = m.recentered(&param);
        let speeds = parameter_speeds(&mr);
        let width = d.min((2.0 * horizon).sqrt());
        let reach = (180.0 * horizon).sqrt() + 10.0 * d;
        let order = match (mr.dim(), refine) {
            (1, false) => cfg.surface_order,
            (1, true) => 2 * cfg.surface_order,
            (_, false) => cfg.surface_order_2d,
            (_, true) => 2 * cfg.surface_order_2d,
        };
        for cell in graded_cells(&mr, &center, width, reach) {
            let cp = mr.point(&cell.center());
            let lb = (crate::geometry::motion::dist(&cp, x) - cell.reach(&speeds)).max(0.0);
            if lb * lb / (4.0 * horizon) > 700.0 {
                continue;
            }
            for (th, w) in cell.nodes(order) {
                let j = mr.jet_with(&th, false);
                let jac = area_element(&j.d1);
                for i in 0..n {
                    z[i] = x[i] - j.point[i];
                }
                let r = norm(&z);
                let zz = r * r / (4.0 * horizon);
                let ez = (-zz).exp();
                let big = upper_gamma(a, zz);
                let e = e_pref * ez;
                let phi = k * r.powf(2.0 - nf) * big;
                let d1 = k * ((2.0 - nf) * r.powf(1.0 - nf) * big - 2.0 * e / r);
                let d2 = k * ((nf - 2.0) * (nf - 1.0) * r.powf(-nf) * big + 2.0 * e * ((nf - 1.0) / (r * r) + 0.5 / horizon));
                let dt = k * e / horizon;
                acc.add_radial(&z, r, w * jac, phi, d1, d2, dt);
            }
        }
    }
    acc
}

/// General path: geometric panels in `τ = t − s`, foot-centred surface
/// panels for narrow kernels and a uniform rule once the kernel is broad.
fn time_panels(mm: &MovingManifold, lower: f64, x: &[f64], t: f64, cfg: &QuadratureConfig) -> Acc {
    let n = mm.ambient();
    let horizon = t - lower;
    let gl = gauss_legendre(cfg.time_order);
    let mut acc = Acc::new(n);
    let mut z = vec![0.0; n];
    let log_cut = -cfg.cutoff.ln();
    for c in 0..mm.n_components() {
        let (m, fam) = mm.component(c);
        let is_static = fam.is_identity();
        let (p0, _, d0) = component_nearest(m, &fam.snapshot(t), x, None);
        if d0 * d0 / (4.0 * horizon) > log_cut + 50.0 {
            continue;
        }
        let lo = d0 * d0 / (4.0 * (log_cut + 60.0));
        if lo >= horizon {
            continue;
        }
        let speeds = parameter_speeds(m);
        let smax = speeds.iter().cloned().fold(0.0, f64::max);
        let mut uniform: Option<SurfaceQuadrature> = None;
        let mut last_param = p0.clone();
        let mut last_d = d0;
        for (pa, pb) in geometric_panels(lo, horizon, (d0 * d0).max(1e-300), cfg.panel_ratio) {
            for (tau, wt) in gl.on(pa, pb) {
                let snap = fam.snapshot(t - tau);
                let gnorm = (4.0 * PI * tau).powf(-0.5 * n as f64);
                let foot_pt = m.point(&last_param);
                let gain = snapshot_gain(&snap, &foot_pt);
                let sigma = (2.0 * tau).sqrt() / (smax * gain);
                if m.is_compact() && sigma * cfg.trapezoid_nodes as f64 >= 8.5 {
                    let q = uniform.get_or_insert_with(|| {
                        SurfaceQuadrature::uniform(m, cfg.trapezoid_nodes).expect("compact manifold")
                    });
                    for (xi, w) in q.moved(&snap) {
                        for i in 0..n {
                            z[i] = x[i] - xi[i];
                        }
                        let e = (-(z.iter().map(|v| v * v).sum::<f64>()) / (4.0 * tau)).exp();
                        if e > 0.0 {
                            acc.add_gauss(&z, tau, wt * w * gnorm * e);
                        }
                    }
                    continue;
                }
                let (param, ds) = if is_static {
                    (p0.clone(), d0)
                } else {
                    let (p, _, d) = component_nearest(m, &snap, x, Some(&last_param));
                    if (d - last_d).abs() > 0.5 * last_d {
                        let (p, _, d) = component_nearest(m, &snap, x, None);
                        (p, d)
                    } else {
                        (p, d)
                    }
                };
                last_param = param.clone();
                last_d = ds;
                if ds * ds / (4.0 * tau) > log_cut {
                    continue;
                }
                let (mr, center) = m.recentered(&param);
                let width = (2.0 * tau).sqrt() / gain;
                let reach = (240.0 * tau).sqrt() / gain;
                let order = if mr.dim() == 1 { cfg.surface_order } else { cfg.surface_order_2d };
                let rspeeds = parameter_speeds(&mr);
                for cell in graded_cells(&mr, &center, width, reach) {
                    let mut cp = vec![0.0; n];
                    snap.apply_into(&mr.point(&cell.center()), &mut cp);
                    let lb = (crate::geometry::motion::dist(&cp, x) - gain * cell.reach(&rspeeds)).max(0.0);
                    if (lb * lb - ds * ds) / (4.0 * tau) > 40.0 {
                        continue;
                    }
                    for (th, w) in cell.nodes(order) {
                        let j = moved_jet(&mr, &snap, &th, false);
                        let jac = area_element(&j.d1);
                        for i in 0..n {
                            z[i] = x[i] - j.point[i];
                        }
                        let e = (-(z.iter().map(|v| v * v).sum::<f64>()) / (4.0 * tau)).exp();
                        if e > 0.0 {
                            acc.add_gauss(&z, tau, wt * w * jac * gnorm * e);
                        }
                    }
                }
            }
        }
    }
    acc
}
