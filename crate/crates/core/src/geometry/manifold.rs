//! Parametric base manifolds `M_0` and their time-dependent images.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::motion::{MotionFamily, MotionSnapshot};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Circle of the given radius in the coordinate plane `(e_i, e_j)`.
    Circle { radius: f64, plane: (usize, usize) },
    /// Round 2-sphere in `span(e_1, e_2, e_3)`.
    Sphere { radius: f64 },
    /// Torus of revolution in `span(e_1, e_2, e_3)`.
    Torus { major: f64, minor: f64 },
    /// Flat `dim`-plane `span(e_1, .., e_dim)`; non-compact, oracle use only.
    FlatPlane { dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

impl Axis {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Point and first/second parameter derivatives of a parametrization.
#[derive(Debug, Clone)]
pub struct Jet {
    pub point: Vec<f64>,
    /// `d1[a]` = ∂ψ/∂θ_a
    pub d1: Vec<Vec<f64>>,
    /// `d2[a][b]` = ∂²ψ/∂θ_a∂θ_b
    pub d2: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParametricManifold {
    pub ambient: usize,
    pub shape: Shape,
    pub center: Vec<f64>,
    /// Orthogonal change of frame applied to the canonical embedding.
    pub frame: Option<DMatrix<f64>>,
}

impl ParametricManifold {
    pub fn new(ambient: usize, shape: Shape) -> Result<Self> {
        let m = ParametricManifold { ambient, shape, center: vec![0.0; ambient], frame: None };
        m.validate()?;
        Ok(m)
    }

    pub fn circle(ambient: usize, radius: f64) -> Result<Self> {
        Self::new(ambient, Shape::Circle { radius, plane: (0, 1) })
    }

    pub fn sphere(ambient: usize, radius: f64) -> Result<Self> {
        Self::new(ambient, Shape::Sphere { radius })
    }

    pub fn torus(ambient: usize, major: f64, minor: f64) -> Result<Self> {
        Self::new(ambient, Shape::Torus { major, minor })
    }

    pub fn flat(ambient: usize, dim: usize) -> Result<Self> {
        Self::new(ambient, Shape::FlatPlane { dim })
    }

    pub fn translated(mut self, offset: &[f64]) -> Self {
        for (c, o) in self.center.iter_mut().zip(offset) {
            *c += o;
        }
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.ambient;
        let ok = match self.shape {
            Shape::Circle { radius, plane: (i, j) } => radius > 0.0 && i < n && j < n && i != j,
            Shape::Sphere { radius } => radius > 0.0 && n >= 3,
            Shape::Torus { major, minor } => minor > 0.0 && major > minor && n >= 3,
            Shape::FlatPlane { dim } => dim >= 1 && dim < n,
        };
        if !ok {
            return Err(Error::Config(format!("invalid manifold {:?} in R^{n}", self.shape)));
        }
        Ok(())
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match self.shape {
            Shape::Circle { .. } => 1,
            Shape::Sphere { .. } | Shape::Torus { .. } => 2,
            Shape::FlatPlane { dim } => dim,
        }
    }

    pub fn codim(&self) -> usize {
        self.ambient - self.dim()
    }

    pub fn is_compact(&self) -> bool {
        !matches!(self.shape, Shape::FlatPlane { .. })
    }

    pub fn axes(&self) -> Vec<Axis> {
        let per = Axis { lo: 0.0, hi: 2.0 * PI, periodic: true };
        match self.shape {
            Shape::Circle { .. } => vec![per],
            Shape::Sphere { .. } => vec![Axis { lo: -0.5 * PI, hi: 0.5 * PI, periodic: false }, per],
            Shape::Torus { .. } => vec![per, per],
            Shape::FlatPlane { dim } => {
                vec![Axis { lo: f64::NEG_INFINITY, hi: f64::INFINITY, periodic: false }; dim]
            }
        }
    }

    /// Exact `H^m(M_0)` for the analytic shapes.
    pub fn analytic_volume(&self) -> Option<f64> {
        match self.shape {
            Shape::Circle { radius, .. } => Some(2.0 * PI * radius),
            Shape::Sphere { radius } => Some(4.0 * PI * radius * radius),
            Shape::Torus { major, minor } => Some(4.0 * PI * PI * major * minor),
            Shape::FlatPlane { .. } => None,
        }
    }

    /// Canonical coordinates: (point, first derivatives, second derivatives)
    /// in the first few ambient axes before framing.
    fn canonical_jet(&self, th: &[f64], want_d2: bool) -> Jet {
        let n = self.ambient;
        let m = self.dim();
        let mut p = vec![0.0; n];
        let mut d1 = vec![vec![0.0; n]; m];
        let mut d2 = if want_d2 { vec![vec![vec![0.0; n]; m]; m] } else { Vec::new() };
        match self.shape {
            Shape::Circle { radius: a, plane: (i, j) } => {
                let (s, c) = th[0].sin_cos();
                p[i] = a * c;
                p[j] = a * s;
                d1[0][i] = -a * s;
                d1[0][j] = a * c;
                if want_d2 {
                    d2[0][0][i] = -a * c;
                    d2[0][0][j] = -a * s;
                }
            }
            Shape::Sphere { radius: a } => {
                let (st, ct) = th[0].sin_cos();
                let (sp, cp) = th[1].sin_cos();
                p[0] = a * ct * cp;
                p[1] = a * ct * sp;
                p[2] = a * st;
                d1[0][0] = -a * st * cp;
                d1[0][1] = -a * st * sp;
                d1[0][2] = a * ct;
                d1[1][0] = -a * ct * sp;
                d1[1][1] = a * ct * cp;
                if want_d2 {
                    d2[0][0][0] = -a * ct * cp;
                    d2[0][0][1] = -a * ct * sp;
                    d2[0][0][2] = -a * st;
                    d2[0][1][0] = a * st * sp;
                    d2[0][1][1] = -a * st * cp;
                    d2[1][0] = d2[0][1].clone();
                    d2[1][1][0] = -a * ct * cp;
                    d2[1][1][1] = -a * ct * sp;
                }
            }
            Shape::Torus { major: r0, minor: r1 } => {
                let (sp, cp) = th[0].sin_cos();
                let (st, ct) = th[1].sin_cos();
                let w = r0 + r1 * ct;
                p[0] = w * cp;
                p[1] = w * sp;
                p[2] = r1 * st;
                d1[0][0] = -w * sp;
                d1[0][1] = w * cp;
                d1[1][0] = -r1 * st * cp;
                d1[1][1] = -r1 * st * sp;
                d1[1][2] = r1 * ct;
                if want_d2 {
                    d2[0][0][0] = -w * cp;
                    d2[0][0][1] = -w * sp;
                    d2[0][1][0] = r1 * st * sp;
                    d2[0][1][1] = -r1 * st * cp;
                    d2[1][0] = d2[0][1].clone();
                    d2[1][1][0] = -r1 * ct * cp;
                    d2[1][1][1] = -r1 * ct * sp;
                    d2[1][1][2] = -r1 * st;
                }
            }
            Shape::FlatPlane { dim } => {
                for a in 0..dim {
                    p[a] = th[a];
                    d1[a][a] = 1.0;
                }
            }
        }
        Jet { point: p, d1, d2 }
    }

    fn frame_vec(&self, v: &mut Vec<f64>) {
        if let Some(q) = &self.frame {
            let w: Vec<f64> = (0..self.ambient)
                .map(|i| (0..self.ambient).map(|j| q[(i, j)] * v[j]).sum())
                .collect();
            *v = w;
        }
    }

    pub fn jet(&self, th: &[f64]) -> Jet {
        self.jet_with(th, true)
    }

    pub fn jet_with(&self, th: &[f64], want_d2: bool) -> Jet {
        let mut j = self.canonical_jet(th, want_d2);
        self.frame_vec(&mut j.point);
        for (p, c) in j.point.iter_mut().zip(&self.center) {
            *p += c;
        }
        for v in j.d1.iter_mut() {
            self.frame_vec(v);
        }
        for row in j.d2.iter_mut() {
            for v in row.iter_mut() {
                self.frame_vec(v);
            }
        }
        j
    }

    pub fn point(&self, th: &[f64]) -> Vec<f64> {
        self.jet_with(th, false).point
    }

    /// Wraps periodic coordinates into their fundamental domain.
    pub fn wrap(&self, th: &mut [f64]) {
        for (v, ax) in th.iter_mut().zip(self.axes()) {
            if ax.periodic {
                *v = ax.lo + (*v - ax.lo).rem_euclid(ax.length());
            } else if ax.lo.is_finite() {
                *v = v.clamp(ax.lo, ax.hi);
            }
        }
    }

    /// Parameter grid used as Newton starts.
    pub fn start_params(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let axes = self.axes();
        let one = |ax: &Axis, k: usize, count: usize| -> f64 {
            if ax.periodic {
                ax.lo + ax.length() * k as f64 / count as f64
            } else if ax.lo.is_finite() {
                ax.lo + ax.length() * (k as f64 + 0.5) / count as f64
            } else {
                0.0
            }
        };
        match axes.len() {
            1 => (0..per_axis).map(|k| vec![one(&axes[0], k, per_axis)]).collect(),
            _ => {
                let second = (per_axis / 2).max(2);
                let mut out = Vec::new();
                if axes.iter().all(|a| !a.lo.is_finite()) {
                    return vec![vec![0.0; axes.len()]];
                }
                for a in 0..per_axis {
                    for b in 0..second {
                        out.push(vec![one(&axes[0], a, per_axis), one(&axes[1], b, second)]);
                    }
                }
                out
            }
        }
    }

    /// Same surface, reparametrized so that parameter 0 sits at `psi(th0)`
    /// (moves coordinate poles away from `th0`; identity for the others).
    pub fn recentered(&self, th0: &[f64]) -> (ParametricManifold, Vec<f64>) {
        match self.shape {
            Shape::Sphere { .. } => {
                let n = self.ambient;
                let j = self.canonical_jet(th0, false);
                let radius = j.point.iter().map(|v| v * v).sum::<f64>().sqrt();
                let e1: Vec<f64> = j.point.iter().map(|v| v / radius).collect();
                // orthonormal completion inside span(e_1, e_2, e_3)
                let mut basis = vec![e1];
                for k in 0..3 {
                    let mut v = vec![0.0; n];
                    v[k] = 1.0;
                    for b in &basis {
                        let d: f64 = b.iter().zip(&v).map(|(x, y)| x * y).sum();
                        for (vi, bi) in v.iter_mut().zip(b) {
                            *vi -= d * bi;
                        }
                    }
                    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if nv > 1e-6 && basis.len() < 3 {
                        basis.push(v.iter().map(|x| x / nv).collect());
                    }
                }
                let mut q = DMatrix::identity(n, n);
                for (c, b) in basis.iter().enumerate() {
                    for r in 0..n {
                        q[(r, c)] = b[r];
                    }
                }
                let q = match &self.frame {
                    Some(f) => f * q,
                    None => q,
                };
                let mut out = self.clone();
                out.frame = Some(q);
                (out, vec![0.0, 0.0])
            }
            _ => (self.clone(), th0.to_vec()),
        }
    }
}

/// Area element `sqrt(det(D^T D))` of `m` tangent vectors.
pub fn area_element(tangents: &[Vec<f64>]) -> f64 {
    match tangents.len() {
        1 => norm(&tangents[0]),
        2 => {
            let a = dot(&tangents[0], &tangents[0]);
            let b = dot(&tangents[1], &tangents[1]);
            let c = dot(&tangents[0], &tangents[1]);
            (a * b - c * c).max(0.0).sqrt()
        }
        m => {
            let g = DMatrix::from_fn(m, m, |i, j| dot(&tangents[i], &tangents[j]));
            g.determinant().max(0.0).sqrt()
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Gram–Schmidt; drops (near-)dependent vectors.
pub fn orthonormalize(vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
    for v in vs {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &out {
                let d = dot(b, &w);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= d * bi;
                }
            }
        }
        let nw = norm(&w);
        if nw > 1e-12 * norm(v).max(1e-300) {
            out.push(w.iter().map(|x| x / nw).collect());
        }
    }
    out
}

/// Orthonormal basis of the orthogonal complement of `span(tangents)` in `R^n`.
pub fn normal_basis(tangents: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut all = orthonormalize(tangents);
    let k = all.len();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        all.push(e);
        all = orthonormalize(&all);
        if all.len() == n {
            break;
        }
    }
    all.split_off(k)
}

/// The singular set: base manifold under a motion, optionally with extra
/// disjoint components.
#[derive(Debug, Clone)]
pub struct MovingManifold {
    pub base: ParametricManifold,
    pub motion: MotionFamily,
    pub extra: Vec<(ParametricManifold, MotionFamily)>,
}

impl MovingManifold {
    pub fn new(base: ParametricManifold, motion: MotionFamily) -> Result<Self> {
        if base.ambient != motion.ambient {
            return Err(Error::Config("manifold and motion dimensions differ".into()));
        }
        Ok(MovingManifold { base, motion, extra: Vec::new() })
    }

    pub fn static_manifold(base: ParametricManifold, lower: f64) -> Self {
        let n = base.ambient;
        MovingManifold { base, motion: MotionFamily::identity(n, lower), extra: Vec::new() }
    }

    pub fn with_component(mut self, m: ParametricManifold, motion: MotionFamily) -> Result<Self> {
        if m.ambient != self.ambient() || m.dim() != self.dim() {
            return Err(Error::Config("components must share ambient and intrinsic dimension".into()));
        }
        self.extra.push((m, motion));
        Ok(self)
    }

    pub fn ambient(&self) -> usize {
        self.base.ambient
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn codim(&self) -> usize {
        self.base.codim()
    }

    pub fn components(&self) -> impl Iterator<Item = (&ParametricManifold, &MotionFamily)> {
        std::iter::once((&self.base, &self.motion)).chain(self.extra.iter().map(|(m, f)| (m, f)))
    }

    pub fn component(&self, k: usize) -> (&ParametricManifold, &MotionFamily) {
        if k == 0 {
            (&self.base, &self.motion)
        } else {
            let (m, f) = &self.extra[k - 1];
            (m, f)
        }
    }

    pub fn n_components(&self) -> usize {
        1 + self.extra.len()
    }

    pub fn lower_time(&self) -> f64 {
        self.components().map(|(_, f)| f.lower).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_static(&self) -> bool {
        self.components().all(|(_, f)| f.is_identity())
    }

    pub fn is_compact(&self) -> bool {
        self.components().all(|(m, _)| m.is_compact())
    }

    /// Enforces the codimension gate `n - m >= 3`.
    pub fn check_codimension(&self) -> Result<()> {
        if self.codim() < 3 {
            return Err(Error::Regime(format!(
                "codimension n - m = {} < 3; the singular potential needs n - m >= 3",
                self.codim()
            )));
        }
        Ok(())
    }

    /// Point, tangents and second derivatives of `F_t o psi` for component `k`.
    pub fn moved_jet(&self, k: usize, th: &[f64], t: f64, want_d2: bool) -> Jet {
        let (m, f) = self.component(k);
        let snap = f.snapshot(t);
        moved_jet(m, &snap, th, want_d2)
    }

    pub fn point(&self, k: usize, th: &[f64], t: f64) -> Vec<f64> {
        let (m, f) = self.component(k);
        let p = m.point(th);
        let mut out = vec![0.0; p.len()];
        f.snapshot(t).apply_into(&p, &mut out);
        out
    }

    /// Checks that components stay apart on a parameter sample at each time.
    pub fn check_disjoint(&self, times: &[f64], per_axis: usize) -> Result<f64> {
        let mut min_gap = f64::INFINITY;
        for &t in times {
            let clouds: Vec<Vec<Vec<f64>>> = (0..self.n_components())
                .map(|k| {
                    let (m, _) = self.component(k);
                    m.start_params(per_axis).iter().map(|th| self.point(k, th, t)).collect()
                })
                .collect();
            for a in 0..clouds.len() {
                for b in (a + 1)..clouds.len() {
                    for p in &clouds[a] {
                        for q in &clouds[b] {
                            min_gap = min_gap.min(super::motion::dist(p, q));
                        }
                    }
                }
            }
        }
        if min_gap <= 1e-9 {
            return Err(Error::Config("manifold components intersect on samples".into()));
        }
        Ok(min_gap)
    }
}

pub(crate) fn moved_jet(m: &ParametricManifold, snap: &MotionSnapshot<'_>, th: &[f64], want_d2: bool) -> Jet {
    let j = m.jet_with(th, want_d2);
    if snap.is_identity() {
        return j;
    }
    let n = m.ambient;
    let mut point = vec![0.0; n];
    snap.apply_into(&j.point, &mut point);
    let push = |v: &Vec<f64>| {
        let mut o = vec![0.0; n];
        snap.push_vector(&j.point, v, &mut o);
        o
    };
    let d1: Vec<Vec<f64>> = j.d1.iter().map(push).collect();
    let d2 = match snap {
        MotionSnapshot::Custom { .. } if want_d2 => {
            // D²(F∘ψ) by differencing the pushed tangents
            let dm = th.len();
            let h = 1e-5;
            let mut d2 = vec![vec![vec![0.0; n]; dm]; dm];
            for a in 0..dm {
                let mut tp = th.to_vec();
                let mut tm = th.to_vec();
                tp[a] += h;
                tm[a] -= h;
                let jp = moved_jet(m, snap, &tp, false);
                let jm = moved_jet(m, snap, &tm, false);
                for b in 0..dm {
                    for i in 0..n {
                        d2[a][b][i] = (jp.d1[b][i] - jm.d1[b][i]) / (2.0 * h);
                    }
                }
            }
            d2
        }
        _ => j.d2.iter().map(|row| row.iter().map(push).collect()).collect(),
    };
    Jet { point, d1, d2 }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(m: &ParametricManifold, th: &[f64]) {
        let j = m.jet(th);
        let h = 1e-6;
        for a in 0..m.dim() {
            let mut tp = th.to_vec();
            let mut tm = th.to_vec();
            tp[a] += h;
            tm[a] -= h;
            let (jp, jm) = (m.jet(&tp), m.jet(&tm));
            for i in 0..m.ambient {
                let fd = (jp.point[i] - jm.point[i]) / (2.0 * h);
                assert!((fd - j.d1[a][i]).abs() < 1e-8, "d1 mismatch");
                for b in 0..m.dim() {
                    let fd2 = (jp.d1[b][i] - jm.d1[b][i]) / (2.0 * h);
                    assert!((fd2 - j.d2[a][b][i]).abs() < 1e-7, "d2 mismatch");
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        fd_check(&ParametricManifold::circle(4, 1.3).unwrap(), &[0.4]);
        fd_check(&ParametricManifold::sphere(5, 0.8).unwrap(), &[0.3, 2.0]);
        fd_check(&ParametricManifold::torus(5, 2.0, 0.5).unwrap(), &[1.1, -0.7]);
        let s = ParametricManifold::sphere(5, 0.8).unwrap();
        let (r, th0) = s.recentered(&[1.2, 0.4]);
        fd_check(&r, &[0.1, 0.2]);
        let p = r.point(&th0);
        let q = s.point(&[1.2, 0.4]);
        assert!(super::super::motion::dist(&p, &q) < 1e-12);
    }

    #[test]
    fn codimension_gate() {
        let m = MovingManifold::static_manifold(ParametricManifold::circle(3, 1.0).unwrap(), -2.0);
        assert!(matches!(m.check_codimension(), Err(Error::Regime(_))));
        let m = MovingManifold::static_manifold(ParametricManifold::circle(4, 1.0).unwrap(), -2.0);
        assert!(m.check_codimension().is_ok());
    }

    #[test]
    fn disjoint_components() {
        let a = ParametricManifold::circle(4, 1.0).unwrap();
        let b = a.clone().translated(&[0.0, 0.0, 3.0, 0.0]);
        let m = MovingManifold::static_manifold(a, -2.0)
            .with_component(b, MotionFamily::identity(4, -2.0))
            .unwrap();
        let gap = m.check_disjoint(&[0.0, 1.0], 16).unwrap();
        assert!((gap - 3.0).abs() < 1e-12);
    }
}
