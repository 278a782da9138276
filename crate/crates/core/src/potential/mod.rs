//! The singular heat potential
//! `U(x,t) = c_N⁻¹ ∫_{T̲}^t ∫_{M_s} G(x−ξ, t−s) dH^m(ξ) ds` and its derivatives.

pub(crate) mod asymptotics;
mod eval;
mod oracles;

pub use asymptotics::{asymptotics_scan, AsymptoticsReport, AsymptoticsRow, Region, ScanPlan};
pub use eval::{eval_u, PotentialEval};
pub use oracles::{flat_plane_oracle, flat_selftest, static_oracle, FlatOracle};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::special::gamma;

/// Normalisation `c_N = Γ((N−2)/2) / (4π^{N/2})` of the `N`-dimensional
/// Newtonian kernel.
pub fn c_norm(codim: usize) -> Result<f64> {
    if codim < 3 {
        return Err(Error::domain(format!("c_norm needs N >= 3, got {codim}")));
    }
    let nf = codim as f64;
    Ok(gamma(0.5 * (nf - 2.0)) / (4.0 * PI.powf(0.5 * nf)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TimeIntegration {
    /// Closed-form τ-integral for static manifolds, panels otherwise.
    #[default]
    Auto,
    /// Geometric Gauss–Legendre panels in `τ = t − s`.
    Panels,
    /// Closed-form τ-integral; static manifolds only.
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub time_integration: TimeIntegration,
    /// Ratio of consecutive geometric τ-panels.
    pub panel_ratio: f64,
    /// Gauss–Legendre order per τ-panel.
    pub time_order: usize,
    /// Gauss–Legendre order per surface panel (one-parameter manifolds).
    pub surface_order: usize,
    /// Gauss–Legendre order per surface cell (two-parameter manifolds).
    pub surface_order_2d: usize,
    /// Trapezoid nodes per periodic axis once the kernel is broad.
    pub trapezoid_nodes: usize,
    /// Gaussian factor below which a τ-node is dropped.
    pub cutoff: f64,
    /// Compute the panel-doubling error estimate (roughly triples the cost).
    pub estimate_error: bool,
    /// Evaluations closer than this to `M_t` are refused.
    pub min_distance: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            time_integration: TimeIntegration::Auto,
            panel_ratio: 4.0,
            time_order: 16,
            surface_order: 16,
            surface_order_2d: 8,
            trapezoid_nodes: 64,
            cutoff: 1e-300,
            estimate_error: false,
            min_distance: 1e-6,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.panel_ratio > 1.0
            && self.time_order >= 2
            && self.surface_order >= 2
            && self.surface_order_2d >= 2
            && self.trapezoid_nodes >= 8
            && self.cutoff > 0.0
            && self.cutoff < 1e-10
            && self.min_distance > 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid quadrature settings {self:?}")));
        }
        Ok(())
    }

    /// Same rule with twice as many τ-panels.
    pub fn doubled(&self) -> Self {
        QuadratureConfig { panel_ratio: self.panel_ratio.sqrt(), estimate_error: false, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalisation_constants() {
        assert!((c_norm(3).unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-15);
        assert!((c_norm(4).unwrap() - 1.0 / (4.0 * PI * PI)).abs() < 1e-16);
        for n in 3..9 {
            let c = c_norm(n).unwrap();
            let g = gamma((n as f64 - 2.0) / 2.0);
            assert!((c * 4.0 * PI.powf(n as f64 / 2.0) - g).abs() < 1e-14 * g.max(1.0));
        }
        assert!(c_norm(2).is_err());
    }
}
