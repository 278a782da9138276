//! Super/sub-solution families built from powers of the potential `U`.

mod residual;
mod signs;

pub use residual::{residual, residual_fd, FdResidual};
pub use signs::{
    classify_initial_data, initial_samples, minimal_a_tilde, sign_probes, verify_signs, InitialClass, Membership,
    ProbePlan, ProbeRegion, RegionExtrema, ResidualReport, ResidualRow, SignProbe,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum distance of every chosen exponent from its window edges.
pub const WINDOW_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `1 < p < p_*`: singular solutions exist.
    Subcritical,
    /// `p ≥ p_*`: the singular set is removable.
    CriticalOrAbove,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalExponents {
    pub n: usize,
    pub m: usize,
    pub p: f64,
    /// `n/(n−2)`
    pub p_sg: f64,
    /// `(n−m)/(n−m−2)`
    pub p_star: f64,
    /// Strong-singularity amplitude; subcritical only.
    pub l: Option<f64>,
    /// `2/((n−m−2)(p−1))`
    pub beta: f64,
    pub regime: Regime,
}

impl CriticalExponents {
    pub fn codim(&self) -> usize {
        self.n - self.m
    }

    pub fn require_l(&self) -> Result<f64> {
        self.l.ok_or_else(|| {
            Error::Regime(format!(
                "p = {} >= p_* = {}: the strong amplitude L has radicand 2/(p−1)·(2/(p−1) − (n−m−2)) <= 0",
                self.p, self.p_star
            ))
        })
    }

    pub fn require_subcritical(&self) -> Result<()> {
        if self.regime != Regime::Subcritical {
            return Err(Error::Regime(format!(
                "p = {} is not below p_* = {}; the comparison families need 1 < p < p_*",
                self.p, self.p_star
            )));
        }
        Ok(())
    }
}

pub fn critical_exponents(n: usize, m: usize, p: f64) -> Result<CriticalExponents> {
    if n < m + 3 {
        return Err(Error::Regime(format!("codimension n − m = {} < 3", n as i64 - m as i64)));
    }
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Config(format!("exponent p = {p} must exceed 1")));
    }
    let nf = n as f64;
    let big_n = (n - m) as f64;
    let p_sg = nf / (nf - 2.0);
    let p_star = big_n / (big_n - 2.0);
    let q = 2.0 / (p - 1.0);
    let beta = q / (big_n - 2.0);
    let regime = if p < p_star { Regime::Subcritical } else { Regime::CriticalOrAbove };
    let l = if regime == Regime::Subcritical {
        let rad = q * (q - (big_n - 2.0));
        let v = rad.powf(1.0 / (p - 1.0));
        if !v.is_finite() {
            return Err(Error::Regime(format!("L overflows for p = {p} (exponent 1/(p−1) too large)")));
        }
        Some(v)
    } else {
        None
    };
    Ok(CriticalExponents { n, m, p, p_sg, p_star, l, beta, regime })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    WeakSuper,
    WeakSub,
    StrongSuper,
    StrongSub,
}

impl Family {
    pub fn is_super(&self) -> bool {
        matches!(self, Family::WeakSuper | Family::StrongSuper)
    }
}

/// `Σ a_i U^{e_i} + sign · Ã`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonSolution {
    pub family: Family,
    pub terms: Vec<(f64, f64)>,
    /// `+1` for super-solutions, `−1` for sub-solutions.
    pub offset_sign: f64,
    pub a_tilde: f64,
    pub p: f64,
    /// Weak families: `(c, α)`; strong families: `(L, β, β′, γ)`.
    pub params: Vec<f64>,
}

impl ComparisonSolution {
    pub fn offset(&self) -> f64 {
        self.offset_sign * self.a_tilde
    }

    pub fn with_a_tilde(&self, a: f64) -> Self {
        ComparisonSolution { a_tilde: a, ..self.clone() }
    }

    /// Value as a function of `U`.
    pub fn value(&self, u: f64) -> f64 {
        self.terms.iter().map(|(a, e)| a * u.powf(*e)).sum::<f64>() + self.offset()
    }

    /// `d/dU` and `d²/dU²` of the `U`-polynomial.
    pub fn derivatives(&self, u: f64) -> (f64, f64) {
        let d1 = self.terms.iter().map(|(a, e)| a * e * u.powf(e - 1.0)).sum();
        let d2 = self.terms.iter().map(|(a, e)| a * e * (e - 1.0) * u.powf(e - 2.0)).sum();
        (d1, d2)
    }

    /// Leading amplitude (`c` or `L`) of the boundary law.
    pub fn amplitude(&self) -> f64 {
        self.params[0]
    }
}

/// Exponent overrides; `None` takes the window midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentChoices {
    pub alpha: Option<f64>,
    pub beta_prime: Option<f64>,
    pub gamma: Option<f64>,
}

fn pick(name: &str, lo: f64, hi: f64, choice: Option<f64>) -> Result<f64> {
    if !(hi - lo > 2.0 * WINDOW_MARGIN) {
        return Err(Error::Regime(format!("empty window for {name}: ({lo}, {hi})")));
    }
    let v = choice.unwrap_or(0.5 * (lo + hi));
    if !(v > lo + WINDOW_MARGIN && v < hi - WINDOW_MARGIN) {
        return Err(Error::Regime(format!("{name} = {v} lies outside its window ({lo}, {hi})")));
    }
    Ok(v)
}

/// `α` window `(max{0, p − 2/(n−m−2)}, 1)`.
pub fn alpha_window(ex: &CriticalExponents) -> (f64, f64) {
    ((ex.p - 2.0 / (ex.codim() as f64 - 2.0)).max(0.0), 1.0)
}

/// `β′` window `(β − 1/(n−m−2), β)`.
pub fn beta_prime_window(ex: &CriticalExponents) -> (f64, f64) {
    (ex.beta - 1.0 / (ex.codim() as f64 - 2.0), ex.beta)
}

/// `γ` window `(0, min{1, β′, ((n−2)βp − 2)/(n−2)})`.
pub fn gamma_window(ex: &CriticalExponents, beta_prime: f64) -> (f64, f64) {
    let n2 = ex.n as f64 - 2.0;
    (0.0, 1f64.min(beta_prime).min((n2 * ex.beta * ex.p - 2.0) / n2))
}

/// `cU + Ã` and `cU − U^α − Ã`.
pub fn make_weak(
    ex: &CriticalExponents,
    c: f64,
    a: f64,
    choices: &ExponentChoices,
) -> Result<(ComparisonSolution, ComparisonSolution)> {
    ex.require_subcritical()?;
    if !(c > 0.0) || !(a >= 0.0) {
        return Err(Error::Config(format!("weak family needs c > 0 and A >= 0, got c = {c}, A = {a}")));
    }
    let (lo, hi) = alpha_window(ex);
    let alpha = pick("alpha", lo, hi, choices.alpha).map_err(|e| match e {
        Error::Regime(msg) if choices.alpha.is_none() => Error::Internal(msg),
        other => other,
    })?;
    let a_tilde = a.max(1.0);
    let sup = ComparisonSolution {
        family: Family::WeakSuper,
        terms: vec![(c, 1.0)],
        offset_sign: 1.0,
        a_tilde,
        p: ex.p,
        params: vec![c, alpha],
    };
    let sub = ComparisonSolution {
        family: Family::WeakSub,
        terms: vec![(c, 1.0), (-1.0, alpha)],
        offset_sign: -1.0,
        a_tilde,
        p: ex.p,
        params: vec![c, alpha],
    };
    Ok((sup, sub))
}

/// `LU^β ± U^{β′} ± U^γ ± Ã`.
pub fn make_strong(
    ex: &CriticalExponents,
    a: f64,
    choices: &ExponentChoices,
) -> Result<(ComparisonSolution, ComparisonSolution)> {
    ex.require_subcritical()?;
    if !(a >= 0.0) {
        return Err(Error::Config(format!("strong family needs A >= 0, got {a}")));
    }
    let l = ex.require_l()?;
    let (lo, hi) = beta_prime_window(ex);
    let bp = pick("beta_prime (β − 1/(n−m−2) < β′ < β)", lo, hi, choices.beta_prime)?;
    let (glo, ghi) = gamma_window(ex, bp);
    let g = pick("gamma (0 < γ < min{1, β′, ((n−2)βp − 2)/(n−2)})", glo, ghi, choices.gamma)?;
    let a_tilde = a.max(1.0);
    let params = vec![l, ex.beta, bp, g];
    let sup = ComparisonSolution {
        family: Family::StrongSuper,
        terms: vec![(l, ex.beta), (1.0, bp), (1.0, g)],
        offset_sign: 1.0,
        a_tilde,
        p: ex.p,
        params: params.clone(),
    };
    let sub = ComparisonSolution {
        family: Family::StrongSub,
        terms: vec![(l, ex.beta), (-1.0, bp), (-1.0, g)],
        offset_sign: -1.0,
        a_tilde,
        p: ex.p,
        params,
    };
    Ok((sup, sub))
}
