use super::ComparisonSolution;
use crate::error::Result;
use crate::geometry::MovingManifold;
use crate::potential::{eval_u, PotentialEval, QuadratureConfig};

/// `sign(u)|u|^p`
pub(crate) fn absorption(u: f64, p: f64) -> f64 {
    u.signum() * u.abs().powf(p)
}

/// `(∂_t − Δ)w + sign(w)|w|^p` for `w = Σ aᵢU^{eᵢ} ± Ã`, using `(∂_t − Δ)U = 0`.
pub fn residual(sol: &ComparisonSolution, ev: &PotentialEval) -> f64 {
    diffusion(sol, ev) + absorption(sol.value(ev.value), sol.p)
}

fn diffusion(sol: &ComparisonSolution, ev: &PotentialEval) -> f64 {
    let u = ev.value;
    let g2 = ev.grad_norm_sq();
    sol.terms
        .iter()
        .map(|(a, e)| if *a == 0.0 || *e == 1.0 { 0.0 } else { -a * e * (e - 1.0) * u.powf(e - 2.0) * g2 })
        .sum()
}

/// Parts of the closed-form residual that do not depend on `Ã`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ResidualParts {
    /// `−Σ aᵢeᵢ(eᵢ−1)U^{eᵢ−2}|∇U|²`
    pub diffusion: f64,
    /// `Σ aᵢU^{eᵢ}`
    pub poly: f64,
    /// `|∂_t w| + |Δw|` with `w` the polynomial part.
    pub linear_scale: f64,
}

impl ResidualParts {
    pub fn new(sol: &ComparisonSolution, ev: &PotentialEval) -> Self {
        let u = ev.value;
        let (d1, d2) = sol.derivatives(u);
        let lap_w = d1 * ev.laplacian() + d2 * ev.grad_norm_sq();
        let dt_w = d1 * ev.dt;
        ResidualParts { diffusion: diffusion(sol, ev), poly: sol.value(u) - sol.offset(), linear_scale: dt_w.abs() + lap_w.abs() }
    }

    pub fn residual(&self, sol: &ComparisonSolution, a_tilde: f64) -> f64 {
        self.diffusion + absorption(self.poly + sol.offset_sign * a_tilde, sol.p)
    }

    pub fn scale(&self, sol: &ComparisonSolution, a_tilde: f64) -> f64 {
        self.linear_scale + (self.poly + sol.offset_sign * a_tilde).abs().powf(sol.p)
    }
}

/// Finite-difference companion of [`residual`].
#[derive(Debug, Clone, Copy)]
pub struct FdResidual {
    pub value: f64,
    pub space_step: f64,
    pub time_step: f64,
}

/// Values of `U` on a space–time stencil around one probe: fourth-order
/// five-point second differences in each coordinate with `h = 0.01 ℓ` and a
/// central time difference with `k = 10⁻³ ℓ²`, where `ℓ = min{d, 2H/d}` is the
/// variation length of `U` at distance `d` with horizon `H = t − T̲`.
#[derive(Debug, Clone)]
pub(crate) struct FdStencil {
    center: f64,
    /// `U(x + o h eᵢ)` for `o ∈ {−2, −1, 1, 2}`.
    axes: Vec<[f64; 4]>,
    later: f64,
    earlier: f64,
    h: f64,
    k: f64,
}

impl FdStencil {
    pub fn new(mm: &MovingManifold, lower: f64, x: &[f64], t: f64, d: f64, cfg: &QuadratureConfig) -> Result<Self> {
        let horizon = t - lower;
        let ell = d.min(2.0 * horizon / d);
        let h = 0.01 * ell;
        let k = (1e-3 * ell * ell).min(0.5 * horizon);
        let u = |y: &[f64], s: f64| -> Result<f64> { Ok(eval_u(mm, lower, y, s, cfg)?.value) };
        let mut y = x.to_vec();
        let mut axes = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let mut f = [0.0; 4];
            for (slot, off) in [-2.0, -1.0, 1.0, 2.0].iter().enumerate() {
                y[i] = x[i] + off * h;
                f[slot] = u(&y, t)?;
            }
            y[i] = x[i];
            axes.push(f);
        }
        Ok(FdStencil { center: u(x, t)?, axes, later: u(x, t + k)?, earlier: u(x, t - k)?, h, k })
    }

    /// The constant offset is added after differencing since it contributes
    /// nothing to `(∂_t − Δ)w`.
    pub fn residual(&self, sol: &ComparisonSolution) -> FdResidual {
        let w = |u: f64| sol.value(u) - sol.offset();
        let w0 = w(self.center);
        let lap: f64 = self
            .axes
            .iter()
            .map(|f| (-w(f[0]) + 16.0 * w(f[1]) - 30.0 * w0 + 16.0 * w(f[2]) - w(f[3])) / (12.0 * self.h * self.h))
            .sum();
        let dt = (w(self.later) - w(self.earlier)) / (2.0 * self.k);
        FdResidual { value: dt - lap + absorption(w0 + sol.offset(), sol.p), space_step: self.h, time_step: self.k }
    }
}

pub fn residual_fd(
    sol: &ComparisonSolution,
    mm: &MovingManifold,
    lower: f64,
    x: &[f64],
    t: f64,
    d: f64,
    cfg: &QuadratureConfig,
) -> Result<FdResidual> {
    Ok(FdStencil::new(mm, lower, x, t, d, cfg)?.residual(sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comparison::{critical_exponents, make_weak, ExponentChoices};
    use nalgebra::{DMatrix, DVector};

    fn fake_eval(u: f64, g: f64) -> PotentialEval {
        PotentialEval {
            value: u,
            gradient: DVector::from_vec(vec![g, 0.0, 0.0, 0.0]),
            hessian: DMatrix::zeros(4, 4),
            dt: 0.0,
            quad_err: f64::NAN,
            distance: 1.0,
            foot: vec![],
        }
    }

    #[test]
    fn weak_sub_residual_at_unit_potential() {
        let ex = critical_exponents(4, 1, 2.0).unwrap();
        let (sup, sub) = make_weak(&ex, 1.0, 0.0, &ExponentChoices::default()).unwrap();
        let ev = fake_eval(1.0, 1.0);
        assert!((residual(&sub.with_a_tilde(0.0), &ev) + 0.25).abs() < 1e-15);
        let sup = sup.with_a_tilde(0.5);
        assert!((residual(&sup, &ev) - 2.25).abs() < 1e-15);
        let parts = ResidualParts::new(&sub, &ev);
        assert!((parts.residual(&sub, 0.0) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_solution_has_zero_residual() {
        let ex = critical_exponents(4, 1, 2.0).unwrap();
        let (sup, _) = make_weak(&ex, 1.0, 0.0, &ExponentChoices::default()).unwrap();
        let mut z = sup.with_a_tilde(0.0);
        z.terms = vec![(0.0, 1.0), (0.0, 0.5)];
        assert_eq!(residual(&z, &fake_eval(0.7, 3.0)), 0.0);
    }
}
