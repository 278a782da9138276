//! Cutoff family `f_ε = η(t) h(V_ε)` with `V_ε = log U / ((N−2) log(1/ε))`
//! and its `W^{2,1}_q` norm over the moving tube.

mod scan;

pub use scan::{
    capacity_scan, capacity_scan_multi, empirical_constants, CapacityPlan, CapacityProfile, CapacityRow,
    ComponentFit, EmpiricalConstants, TubeGrid, Verdict,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::PotentialEval;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Conjugate {
    pub q: f64,
    /// `1 < q ≤ (n−m)/2`, equivalently `p ≥ p_*`.
    pub removable_range: bool,
}

pub fn q_from_p(p: f64, codim: usize) -> Result<Conjugate> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Config(format!("exponent p = {p} must exceed 1")));
    }
    let q = p / (p - 1.0);
    Ok(Conjugate { q, removable_range: q <= codim as f64 / 2.0 + 1e-12 })
}

/// `6s⁵ − 15s⁴ + 10s³` on `[0, 1]`, clamped outside, with two derivatives.
fn smoothstep(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if s >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let v = s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
        let d1 = 30.0 * s * s * (1.0 - s) * (1.0 - s);
        let d2 = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
        (v, d1, d2)
    }
}

/// `max |S'|` and `max |S''|` of the quintic smoothstep.
pub const SMOOTHSTEP_D1_MAX: f64 = 1.875;
pub const SMOOTHSTEP_D2_MAX: f64 = 5.773_502_691_896_258;

/// Time knots `t₇ < t₅ < t₃ < t₁ < t₂ < t₄ < t₆ < t₈`; `η` ramps on
/// `[t₅, t₃]` and `[t₄, t₆]` with plateau 1 on `[t₃, t₄]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffProfile {
    pub knots: [f64; 8],
}

impl Default for CutoffProfile {
    fn default() -> Self {
        CutoffProfile { knots: [-1.75, -1.5, -1.0, 0.0, 1.0, 2.0, 2.5, 3.0] }
    }
}

impl CutoffProfile {
    pub fn new(knots: [f64; 8]) -> Result<Self> {
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config(format!(
                "cutoff knots must satisfy t7 < t5 < t3 < t1 < t2 < t4 < t6 < t8, got {knots:?}"
            )));
        }
        Ok(CutoffProfile { knots })
    }

    /// `T̲ = t₇`.
    pub fn lower(&self) -> f64 {
        self.knots[0]
    }

    pub fn t5(&self) -> f64 {
        self.knots[1]
    }
    pub fn t3(&self) -> f64 {
        self.knots[2]
    }
    pub fn t4(&self) -> f64 {
        self.knots[5]
    }
    pub fn t6(&self) -> f64 {
        self.knots[6]
    }

    /// `(η, η')`
    pub fn eta(&self, t: f64) -> (f64, f64) {
        let (t5, t3, t4, t6) = (self.t5(), self.t3(), self.t4(), self.t6());
        if t <= t3 {
            let w = t3 - t5;
            let (v, d1, _) = smoothstep((t - t5) / w);
            (v, d1 / w)
        } else if t <= t4 {
            (1.0, 0.0)
        } else {
            let w = t6 - t4;
            let (v, d1, _) = smoothstep((t6 - t) / w);
            (v, -d1 / w)
        }
    }

    /// `(h, h', h'')` of the capacity profile: 0 on `(−∞, 1]`, 1 on `[2, ∞)`.
    pub fn h(&self, tau: f64) -> (f64, f64, f64) {
        smoothstep(tau - 1.0)
    }

    /// `‖η'‖_∞ + ‖h'‖_∞ + ‖h''‖_∞`.
    pub fn derivative_bound(&self) -> f64 {
        let ramp = (self.t3() - self.t5()).min(self.t6() - self.t4());
        SMOOTHSTEP_D1_MAX / ramp + SMOOTHSTEP_D1_MAX + SMOOTHSTEP_D2_MAX
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutoffValues {
    pub f: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
    pub dt: f64,
}

/// `f_ε` and its derivatives at a point off `M_t` by the chain rule
/// through `V_ε`.
pub fn cutoff_eval(eps: f64, codim: usize, profile: &CutoffProfile, ev: &PotentialEval, t: f64) -> Result<CutoffValues> {
    if !(eps > 0.0 && eps < (-1f64).exp()) {
        return Err(Error::domain(format!("ε = {eps} must lie in (0, 1/e)")));
    }
    let u = ev.value;
    if !(u > 0.0) {
        return Err(Error::Internal(format!("U = {u} is not positive off the singular set")));
    }
    let n = ev.gradient.len();
    let scale = 1.0 / ((codim as f64 - 2.0) * (1.0 / eps).ln());
    let v = u.ln() * scale;
    let (eta, eta_p) = profile.eta(t);
    let (h, h1, h2) = profile.h(v);
    let dv = &ev.gradient * (scale / u);
    let mut hess = DMatrix::zeros(n, n);
    let mut grad = DVector::zeros(n);
    if h1 != 0.0 || h2 != 0.0 {
        grad = &dv * (eta * h1);
        // V_ij = (U_ij/U − U_iU_j/U²) · scale
        let dvv = (&ev.hessian / u - &ev.gradient * ev.gradient.transpose() / (u * u)) * scale;
        hess = (&dv * dv.transpose() * h2 + dvv * h1) * eta;
    }
    let dt = eta_p * h + eta * h1 * ev.dt / u * scale;
    Ok(CutoffValues { f: eta * h, grad, hess, dt })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugate_exponents() {
        let c = q_from_p(3.0, 3).unwrap();
        assert_eq!(c.q, 1.5);
        assert!(c.removable_range);
        assert!((q_from_p(4.0, 3).unwrap().q - 4.0 / 3.0).abs() < 1e-15);
        let c = q_from_p(2.0, 3).unwrap();
        assert_eq!(c.q, 2.0);
        assert!(!c.removable_range);
    }

    #[test]
    fn profiles_are_bounded_with_exact_plateaus() {
        let p = CutoffProfile::default();
        assert_eq!(p.eta(-1.5), (0.0, 0.0));
        assert_eq!(p.eta(-1.0).0, 1.0);
        assert_eq!(p.eta(2.0), (1.0, 0.0));
        assert_eq!(p.eta(2.5).0, 0.0);
        assert_eq!(p.h(1.0), (0.0, 0.0, 0.0));
        assert_eq!(p.h(2.0), (1.0, 0.0, 0.0));
        for k in 0..=1000 {
            let s = k as f64 / 1000.0;
            let (v, d1, d2) = smoothstep(s);
            assert!((0.0..=1.0).contains(&v));
            assert!(d1.abs() <= SMOOTHSTEP_D1_MAX + 1e-12 && d2.abs() <= SMOOTHSTEP_D2_MAX + 1e-12);
        }
        assert!(CutoffProfile::new([0.0, 1.0, 0.5, 2.0, 3.0, 4.0, 5.0, 6.0]).is_err());
    }
}
