//! Motion families `F_t` carrying the base manifold to `M_t = F_t(M_0)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar time profile with `p(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Zero,
    /// `rate * t`
    Linear { rate: f64 },
    /// `sqrt(t + offset) - sqrt(offset)`
    SqrtDrift { offset: f64 },
    /// `amplitude * sin(frequency * t)`
    Sine { amplitude: f64, frequency: f64 },
}

impl Profile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Linear { rate } => rate * t,
            Profile::SqrtDrift { offset } => (t + offset).sqrt() - offset.sqrt(),
            Profile::Sine { amplitude, frequency } => amplitude * (frequency * t).sin(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Linear { rate } => rate,
            Profile::SqrtDrift { offset } => 0.5 / (t + offset).sqrt(),
            Profile::Sine { amplitude, frequency } => amplitude * frequency * (frequency * t).cos(),
        }
    }

    /// Infimum of times where the profile is defined.
    pub fn domain_lower(&self) -> f64 {
        match *self {
            Profile::SqrtDrift { offset } => -offset,
            _ => f64::NEG_INFINITY,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Profile::Zero)
            || matches!(self, Profile::Linear { rate } if *rate == 0.0)
            || matches!(self, Profile::Sine { amplitude, .. } if *amplitude == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneRotation {
    pub plane: (usize, usize),
    /// Angular velocity; the rotation angle is `rate * t`.
    pub rate: f64,
}

/// `F_t(x) = (1 + scale(t)) R(t) x + shift(t) v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMotion {
    pub scale: Profile,
    pub rotation: Option<PlaneRotation>,
    pub direction: Vec<f64>,
    pub shift: Profile,
}

impl AffineMotion {
    pub fn translation(direction: Vec<f64>, shift: Profile) -> Self {
        AffineMotion { scale: Profile::Zero, rotation: None, direction, shift }
    }

    pub fn matrix(&self, n: usize, t: f64) -> DMatrix<f64> {
        let mut a = DMatrix::identity(n, n) * (1.0 + self.scale.value(t));
        if let Some(rot) = self.rotation {
            let (i, j) = rot.plane;
            let (s, c) = (rot.rate * t).sin_cos();
            let k = 1.0 + self.scale.value(t);
            a[(i, i)] = k * c;
            a[(i, j)] = -k * s;
            a[(j, i)] = k * s;
            a[(j, j)] = k * c;
        }
        a
    }

    pub fn matrix_dt(&self, n: usize, t: f64) -> DMatrix<f64> {
        let k = 1.0 + self.scale.value(t);
        let dk = self.scale.derivative(t);
        let mut a = DMatrix::identity(n, n) * dk;
        if let Some(rot) = self.rotation {
            let (i, j) = rot.plane;
            let (s, c) = (rot.rate * t).sin_cos();
            let w = rot.rate;
            a[(i, i)] = dk * c - k * w * s;
            a[(i, j)] = -dk * s - k * w * c;
            a[(j, i)] = dk * s + k * w * c;
            a[(j, j)] = dk * c - k * w * s;
        }
        a
    }

    pub fn offset(&self, t: f64) -> DVector<f64> {
        DVector::from_column_slice(&self.direction) * self.shift.value(t)
    }

    pub fn offset_dt(&self, t: f64) -> DVector<f64> {
        DVector::from_column_slice(&self.direction) * self.shift.derivative(t)
    }

    fn domain_lower(&self) -> f64 {
        self.scale.domain_lower().max(self.shift.domain_lower())
    }
}

pub type MotionFn = dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync;

/// A general diffeomorphism family given as a closure; derivatives by
/// central differences.
#[derive(Clone)]
pub struct CustomMotion {
    pub name: String,
    pub map: Arc<MotionFn>,
}

impl fmt::Debug for CustomMotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomMotion").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone)]
pub enum MotionKind {
    Identity,
    Affine(AffineMotion),
    Custom(CustomMotion),
}

#[derive(Debug, Clone)]
pub struct MotionFamily {
    pub ambient: usize,
    pub kind: MotionKind,
    /// Lower end of the time interval `I = (lower, inf)`.
    pub lower: f64,
}

const FD_STEP: f64 = 1e-5;

impl MotionFamily {
    pub fn identity(ambient: usize, lower: f64) -> Self {
        MotionFamily { ambient, kind: MotionKind::Identity, lower }
    }

    pub fn affine(ambient: usize, motion: AffineMotion, lower: f64) -> Result<Self> {
        if motion.direction.len() != ambient {
            return Err(Error::Config(format!(
                "shift direction has {} components, ambient dimension is {ambient}",
                motion.direction.len()
            )));
        }
        if let Some(rot) = motion.rotation {
            let (i, j) = rot.plane;
            if i >= ambient || j >= ambient || i == j {
                return Err(Error::Config(format!("bad rotation plane ({i}, {j})")));
            }
        }
        if lower < motion.domain_lower() {
            return Err(Error::Config(format!(
                "motion undefined below t = {}, interval starts at {lower}",
                motion.domain_lower()
            )));
        }
        Ok(MotionFamily { ambient, kind: MotionKind::Affine(motion), lower })
    }

    pub fn custom(ambient: usize, name: &str, map: Arc<MotionFn>, lower: f64) -> Self {
        MotionFamily {
            ambient,
            kind: MotionKind::Custom(CustomMotion { name: name.to_string(), map }),
            lower,
        }
    }

    pub fn is_identity(&self) -> bool {
        match &self.kind {
            MotionKind::Identity => true,
            MotionKind::Affine(a) => {
                a.scale.is_zero()
                    && a.shift.is_zero()
                    && a.rotation.is_none_or(|r| r.rate == 0.0)
            }
            MotionKind::Custom(_) => false,
        }
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        // the closure of I is admissible: F extends past the endpoint
        if !t.is_finite() || t < self.lower {
            return Err(Error::domain(format!(
                "time {t} outside the motion interval ({}, inf)",
                self.lower
            )));
        }
        Ok(())
    }

    /// `F_t(x)`.
    pub fn apply(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        self.check_time(t)?;
        if x.len() != self.ambient {
            return Err(Error::domain(format!("point has dimension {}", x.len())));
        }
        let mut out = vec![0.0; self.ambient];
        self.snapshot(t).apply_into(x, &mut out);
        Ok(out)
    }

    /// Frozen-time evaluator.
    pub fn snapshot(&self, t: f64) -> MotionSnapshot<'_> {
        match &self.kind {
            MotionKind::Identity => MotionSnapshot::Identity,
            MotionKind::Affine(a) => {
                if self.is_identity() {
                    MotionSnapshot::Identity
                } else {
                    MotionSnapshot::Affine {
                        a: a.matrix(self.ambient, t),
                        b: a.offset(t),
                    }
                }
            }
            MotionKind::Custom(c) => MotionSnapshot::Custom { map: &c.map, t, n: self.ambient },
        }
    }

    /// Spatial derivative `DF_t(x)`.
    pub fn jacobian(&self, x: &[f64], t: f64) -> DMatrix<f64> {
        self.snapshot(t).jacobian(x)
    }

    /// `d/dt F_t(x)`.
    pub fn velocity(&self, x: &[f64], t: f64) -> DVector<f64> {
        let n = self.ambient;
        match &self.kind {
            MotionKind::Identity => DVector::zeros(n),
            MotionKind::Affine(a) => {
                a.matrix_dt(n, t) * DVector::from_column_slice(x) + a.offset_dt(t)
            }
            MotionKind::Custom(c) => {
                let h = FD_STEP * (1.0 + t.abs());
                let p = (c.map)(x, t + h);
                let m = (c.map)(x, t - h);
                DVector::from_iterator(n, p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)))
            }
        }
    }

    /// `d/dt DF_t(x)`.
    pub fn jacobian_dt(&self, x: &[f64], t: f64) -> DMatrix<f64> {
        match &self.kind {
            MotionKind::Identity => DMatrix::zeros(self.ambient, self.ambient),
            MotionKind::Affine(a) => a.matrix_dt(self.ambient, t),
            MotionKind::Custom(_) => {
                let h = FD_STEP * (1.0 + t.abs());
                (self.jacobian(x, t + h) - self.jacobian(x, t - h)) / (2.0 * h)
            }
        }
    }

    /// Norm of the second spatial derivative tensor (zero for affine kinds).
    pub fn second_derivative_norm(&self, x: &[f64], t: f64) -> f64 {
        match &self.kind {
            MotionKind::Identity | MotionKind::Affine(_) => 0.0,
            MotionKind::Custom(_) => {
                let n = self.ambient;
                let mut acc = 0.0;
                let h = 1e-4;
                for k in 0..n {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[k] += h;
                    xm[k] -= h;
                    let d = (self.jacobian(&xp, t) - self.jacobian(&xm, t)) / (2.0 * h);
                    acc += d.norm_squared();
                }
                acc.sqrt()
            }
        }
    }
}

pub enum MotionSnapshot<'a> {
    Identity,
    Affine { a: DMatrix<f64>, b: DVector<f64> },
    Custom { map: &'a Arc<MotionFn>, t: f64, n: usize },
}

impl MotionSnapshot<'_> {
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            MotionSnapshot::Identity => out.copy_from_slice(x),
            MotionSnapshot::Affine { a, b } => {
                let n = x.len();
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = b[i];
                    for j in 0..n {
                        acc += a[(i, j)] * x[j];
                    }
                    *o = acc;
                }
            }
            MotionSnapshot::Custom { map, t, .. } => out.copy_from_slice(&map(x, *t)),
        }
    }

    /// Push a tangent vector at `x` forward: `DF_t(x) v`.
    pub fn push_vector(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        match self {
            MotionSnapshot::Identity => out.copy_from_slice(v),
            MotionSnapshot::Affine { a, .. } => {
                let n = v.len();
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += a[(i, j)] * v[j];
                    }
                    *o = acc;
                }
            }
            MotionSnapshot::Custom { .. } => {
                let j = self.jacobian(x);
                let w = j * DVector::from_column_slice(v);
                out.copy_from_slice(w.as_slice());
            }
        }
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        match self {
            MotionSnapshot::Identity => DMatrix::identity(x.len(), x.len()),
            MotionSnapshot::Affine { a, .. } => a.clone(),
            MotionSnapshot::Custom { map, t, n } => {
                let mut j = DMatrix::zeros(*n, *n);
                for k in 0..*n {
                    let h = FD_STEP * (1.0 + x[k].abs());
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[k] += h;
                    xm[k] -= h;
                    let p = map(&xp, *t);
                    let m = map(&xm, *t);
                    for i in 0..*n {
                        j[(i, k)] = (p[i] - m[i]) / (2.0 * h);
                    }
                }
                j
            }
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, MotionSnapshot::Identity)
    }
}

/// Sampled motion constants.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionValidation {
    pub b_est: f64,
    pub holder_est: f64,
    pub pass: bool,
    pub diagnostic: Option<String>,
}

/// Samples the bound `B` on velocity, first and second derivatives and the
/// inverse bi-Lipschitz constant, and the time-Hölder-1/2 seminorm.
pub fn validate_motion(
    fam: &MotionFamily,
    times: &[f64],
    base_points: &[Vec<f64>],
    cap: f64,
) -> Result<MotionValidation> {
    if times.is_empty() || base_points.is_empty() {
        return Err(Error::domain("validate_motion needs a nonempty sample grid"));
    }
    for &t in times {
        fam.check_time(t)?;
    }
    let mut b_est: f64 = 0.0;
    let mut diagnostic = None;
    for &t in times {
        let snap = fam.snapshot(t);
        for p in base_points {
            let dfm = snap.jacobian(p);
            let sv = dfm.clone().singular_values();
            let smax = sv.max();
            let smin = sv.min();
            if !(smin > 1e-12 * smax.max(1.0)) {
                diagnostic = Some(format!("DF_t degenerate at t = {t}, p = {p:?}"));
                return Ok(MotionValidation { b_est: f64::INFINITY, holder_est: f64::NAN, pass: false, diagnostic });
            }
            let total = fam.velocity(p, t).norm()
                + smax
                + fam.jacobian_dt(p, t).norm()
                + fam.second_derivative_norm(p, t);
            b_est = b_est.max(total);
        }
        // bi-Lipschitz lower bound on sampled pairs
        let mut moved = Vec::with_capacity(base_points.len());
        for p in base_points {
            let mut out = vec![0.0; fam.ambient];
            snap.apply_into(p, &mut out);
            moved.push(out);
        }
        for i in 0..base_points.len() {
            for j in (i + 1)..base_points.len() {
                let d0 = dist(&base_points[i], &base_points[j]);
                if d0 > 0.0 {
                    let ratio = dist(&moved[i], &moved[j]) / d0;
                    b_est = b_est.max(1.0 / ratio);
                }
            }
        }
    }
    let mut holder: f64 = 0.0;
    for (a, &t) in times.iter().enumerate() {
        for &s in &times[a + 1..] {
            if t == s {
                continue;
            }
            let gap = (t - s).abs().sqrt();
            for p in base_points {
                let ft = fam.apply(p, t)?;
                let fs = fam.apply(p, s)?;
                holder = holder.max(dist(&ft, &fs) / gap);
            }
        }
    }
    let pass = b_est.is_finite() && b_est <= cap && holder.is_finite() && holder <= cap;
    if !pass && diagnostic.is_none() {
        diagnostic = Some(format!("B_est = {b_est:.4e}, holder_est = {holder:.4e}, cap = {cap}"));
    }
    Ok(MotionValidation { b_est, holder_est: holder, pass, diagnostic })
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
