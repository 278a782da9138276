//! Scenario files: one TOML document describing the manifold, its motion,
//! the exponents and every module's numerical settings.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::capacity::CapacityPlan;
use crate::comparison::{
    critical_exponents, make_strong, make_weak, ComparisonSolution, CriticalExponents, ExponentChoices, ProbePlan,
};
use crate::error::{Error, Result};
use crate::geometry::{AffineMotion, MotionFamily, MovingManifold, ParametricManifold, PlaneRotation, Profile, Shape};
use crate::potential::{QuadratureConfig, ScanPlan};
use crate::solver::SolverSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Circle,
    Sphere,
    Torus,
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    /// Circle/sphere radius, torus major radius.
    pub radius: f64,
    /// Torus minor radius.
    pub minor: f64,
    /// Coordinate plane of a circle.
    pub plane: (usize, usize),
    /// Translation of the base manifold; empty means the origin.
    pub center: Vec<f64>,
}

impl Default for ManifoldSpec {
    fn default() -> Self {
        ManifoldSpec { kind: ManifoldKind::Circle, radius: 1.0, minor: 0.25, plane: (0, 1), center: Vec::new() }
    }
}

impl ManifoldSpec {
    pub fn build(&self, n: usize, m: usize) -> Result<ParametricManifold> {
        let shape = match self.kind {
            ManifoldKind::Circle => Shape::Circle { radius: self.radius, plane: self.plane },
            ManifoldKind::Sphere => Shape::Sphere { radius: self.radius },
            ManifoldKind::Torus => Shape::Torus { major: self.radius, minor: self.minor },
            ManifoldKind::Flat => Shape::FlatPlane { dim: m },
        };
        let base = ParametricManifold::new(n, shape)?;
        if base.dim() != m {
            return Err(Error::Config(format!(
                "manifold.kind: a {:?} has dimension {}, but dimensions.m = {m}",
                self.kind,
                base.dim()
            )));
        }
        if !self.center.is_empty() && self.center.len() != n {
            return Err(Error::Config(format!("manifold.center: expected {n} coordinates, got {}", self.center.len())));
        }
        Ok(base.translated(&self.center))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    Identity,
    /// `F_t(x) = (1 + scale(t)) R(t) x + shift(t) direction`.
    Affine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionSpec {
    pub kind: MotionKind,
    pub direction: Vec<f64>,
    pub shift: Profile,
    pub scale: Profile,
    pub rotation: Option<PlaneRotation>,
}

impl Default for MotionSpec {
    fn default() -> Self {
        MotionSpec {
            kind: MotionKind::Identity,
            direction: Vec::new(),
            shift: Profile::Zero,
            scale: Profile::Zero,
            rotation: None,
        }
    }
}

impl MotionSpec {
    pub fn build(&self, n: usize, lower: f64) -> Result<MotionFamily> {
        match self.kind {
            MotionKind::Identity => Ok(MotionFamily::identity(n, lower)),
            MotionKind::Affine => {
                let direction = if self.direction.is_empty() { vec![0.0; n] } else { self.direction.clone() };
                if direction.len() != n {
                    return Err(Error::Config(format!(
                        "motion.direction: expected {n} coordinates, got {}",
                        direction.len()
                    )));
                }
                let a = AffineMotion { scale: self.scale, rotation: self.rotation, direction, shift: self.shift };
                MotionFamily::affine(n, a, lower)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ComponentSpec {
    pub manifold: ManifoldSpec,
    pub motion: MotionSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyChoice {
    Weak,
    Strong,
    Both,
}

impl FamilyChoice {
    pub fn includes(&self, strong: bool) -> bool {
        match self {
            FamilyChoice::Both => true,
            FamilyChoice::Weak => !strong,
            FamilyChoice::Strong => strong,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentSpec {
    pub p: f64,
    pub family: FamilyChoice,
    pub alpha: Option<f64>,
    pub beta_prime: Option<f64>,
    pub gamma: Option<f64>,
    /// Weak amplitude `c`.
    pub c: f64,
    /// Initial-data tolerance `A`.
    pub a: f64,
    /// Fixed `Ã`; the minimal admissible value is measured when unset.
    pub a_tilde: Option<f64>,
}

impl Default for ExponentSpec {
    fn default() -> Self {
        ExponentSpec {
            p: 2.0,
            family: FamilyChoice::Both,
            alpha: None,
            beta_prime: None,
            gamma: None,
            c: 1.0,
            a: 0.5,
            a_tilde: None,
        }
    }
}

impl ExponentSpec {
    pub fn choices(&self) -> ExponentChoices {
        ExponentChoices { alpha: self.alpha, beta_prime: self.beta_prime, gamma: self.gamma }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Dimensions {
    pub n: usize,
    pub m: usize,
}

impl Default for Dimensions {
    fn default() -> Self {
        Dimensions { n: 4, m: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacitySection {
    /// Exponents scanned; each is compared with `p_*`.
    pub p: Vec<f64>,
    pub plan: CapacityPlan,
}

impl Default for CapacitySection {
    fn default() -> Self {
        CapacitySection { p: vec![4.0, 3.0, 2.0], plan: CapacityPlan::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub output: PathBuf,
    /// `T̲`, shared by every component's motion.
    pub lower_time: f64,
    pub dimensions: Dimensions,
    pub manifold: ManifoldSpec,
    pub motion: MotionSpec,
    pub components: Vec<ComponentSpec>,
    pub exponents: ExponentSpec,
    pub quadrature: QuadratureConfig,
    pub potential: ScanPlan,
    pub comparison: ProbePlan,
    pub capacity: CapacitySection,
    pub solver: SolverSettings,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "unit-circle".into(),
            seed: 7,
            output: PathBuf::from("out"),
            lower_time: -2.0,
            dimensions: Dimensions::default(),
            manifold: ManifoldSpec::default(),
            motion: MotionSpec::default(),
            components: Vec::new(),
            exponents: ExponentSpec::default(),
            quadrature: QuadratureConfig::default(),
            potential: ScanPlan::default(),
            comparison: ProbePlan::default(),
            capacity: CapacitySection::default(),
            solver: SolverSettings::default(),
        }
    }
}

/// Which command a validation is for; solving and comparison need the
/// subcritical regime, the potential and capacity scans do not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Potential,
    Comparison,
    Capacity,
    Solve,
}

impl ScenarioConfig {
    /// Parses TOML; syntax and unknown-key errors carry line and key.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(format!("serialising scenario: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn moving_manifold(&self) -> Result<MovingManifold> {
        let Dimensions { n, m } = self.dimensions;
        let base = self.manifold.build(n, m)?;
        let mut mm = MovingManifold::new(base, self.motion.build(n, self.lower_time)?)?;
        for (k, c) in self.components.iter().enumerate() {
            let comp = c.manifold.build(n, m).map_err(|e| Error::Config(format!("components[{k}]: {e}")))?;
            mm = mm.with_component(comp, c.motion.build(n, self.lower_time)?)?;
        }
        Ok(mm)
    }

    pub fn exponents(&self) -> Result<CriticalExponents> {
        critical_exponents(self.dimensions.n, self.dimensions.m, self.exponents.p)
    }

    /// `(super, sub)` of the requested family with `Ã` as configured (or `A`).
    pub fn pair(&self, strong: bool) -> Result<(ComparisonSolution, ComparisonSolution)> {
        let ex = self.exponents()?;
        let e = &self.exponents;
        let (sup, sub) =
            if strong { make_strong(&ex, e.a, &e.choices())? } else { make_weak(&ex, e.c, e.a, &e.choices())? };
        Ok(match e.a_tilde {
            Some(a) => (sup.with_a_tilde(a), sub.with_a_tilde(a)),
            None => (sup, sub),
        })
    }

    /// Every cross-field constraint needed by `purpose`, checked before any
    /// compute. Messages name the offending field.
    pub fn validate(&self, purpose: Purpose) -> Result<()> {
        let Dimensions { n, m } = self.dimensions;
        if n < 2 || m == 0 || m >= n {
            return Err(Error::Config(format!("dimensions: need 1 <= m < n, got n = {n}, m = {m}")));
        }
        if n < m + 3 {
            return Err(Error::Regime(format!(
                "dimensions: codimension n − m = {} < 3; the singular potential needs n − m >= 3",
                n - m
            )));
        }
        let mm = self.moving_manifold()?;
        if self.manifold.kind == ManifoldKind::Flat && purpose != Purpose::Potential {
            return Err(Error::Config("manifold.kind: flat planes are non-compact and only serve the potential oracle".into()));
        }
        self.quadrature.validate().map_err(|e| Error::Config(format!("quadrature: {e}")))?;
        let ex = self.exponents()?;
        match purpose {
            Purpose::Potential => {
                if self.potential.t_samples.iter().any(|&t| t <= self.lower_time) {
                    return Err(Error::Config("potential.t_samples: every time must exceed lower_time".into()));
                }
            }
            Purpose::Comparison | Purpose::Solve => {
                if self.exponents.family.includes(true) {
                    ex.require_l()?;
                }
                ex.require_subcritical()?;
                for strong in [false, true] {
                    if self.exponents.family.includes(strong) {
                        self.pair(strong).map_err(|e| Error::Regime(format!("exponents: {e}")))?;
                    }
                }
                if !(self.exponents.a >= 0.0 && self.exponents.c > 0.0) {
                    return Err(Error::Config("exponents: need c > 0 and a >= 0".into()));
                }
                if purpose == Purpose::Comparison {
                    self.comparison.validate().map_err(|e| Error::Config(format!("comparison: {e}")))?;
                } else {
                    self.solver.validate().map_err(|e| Error::Config(format!("solver: {e}")))?;
                    if mm.lower_time() >= 0.0 {
                        return Err(Error::Config("lower_time: must be negative so that t = 0 has a positive horizon".into()));
                    }
                }
            }
            Purpose::Capacity => {
                if self.capacity.p.is_empty() || self.capacity.p.iter().any(|&p| !(p > 1.0)) {
                    return Err(Error::Config("capacity.p: need at least one exponent, each > 1".into()));
                }
                if self.capacity.plan.profile.lower() < self.lower_time {
                    return Err(Error::Config("capacity.plan.profile: knot t7 precedes lower_time".into()));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ScenarioConfig::default();
        let text = c.to_toml().unwrap();
        assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), c);
        assert_eq!(ScenarioConfig::from_toml("").unwrap(), c);
    }
}
