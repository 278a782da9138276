use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use super::SolverSettings;
use crate::error::{Error, Result};
use crate::geometry::{distance, MotionKind, MovingManifold, Profile, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoordinateMode {
    /// `(r₁, r₂)`: radii in the circle's plane and in its orthogonal plane.
    Reduced2d,
    /// `(r₁, x_k, x_l)`: circle translating along `x_k`, reflection in `x_l`.
    Reduced3d,
    /// Cartesian coordinates; small sanity grids only.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisKind {
    /// Radius of a rotation-invariant group of `group` ambient coordinates;
    /// the axis starts at 0 and carries the weight `r^{group−1}`.
    Radial { group: usize },
    Line,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub kind: AxisKind,
    pub nodes: Vec<f64>,
    /// Dual-cell measure `∫ w(r) dr` per node.
    measure: Vec<f64>,
    /// `w(face)/h` between node `i` and `i + 1`.
    coupling: Vec<f64>,
}

impl GridAxis {
    pub fn new(kind: AxisKind, nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("grid axis needs at least 3 increasing nodes".into()));
        }
        if let AxisKind::Radial { group } = kind {
            if group == 0 || nodes[0] != 0.0 {
                return Err(Error::Config("radial axis must start at r = 0".into()));
            }
        }
        let k = nodes.len();
        let weight = |r: f64| match kind {
            AxisKind::Radial { group } => r.powi(group as i32 - 1),
            AxisKind::Line => 1.0,
        };
        let primitive = |r: f64| match kind {
            AxisKind::Radial { group } => r.powi(group as i32) / group as f64,
            AxisKind::Line => r,
        };
        let faces: Vec<f64> = (0..=k)
            .map(|i| match i {
                0 => nodes[0],
                _ if i == k => nodes[k - 1],
                _ => 0.5 * (nodes[i - 1] + nodes[i]),
            })
            .collect();
        let measure = (0..k).map(|i| primitive(faces[i + 1]) - primitive(faces[i])).collect();
        let coupling = (0..k - 1).map(|i| weight(faces[i + 1]) / (nodes[i + 1] - nodes[i])).collect();
        Ok(GridAxis { kind, nodes, measure, coupling })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index `i` with `nodes[i] ≤ x < nodes[i+1]`.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.nodes[0] && x <= *self.nodes.last().unwrap()) {
            return None;
        }
        let i = self.nodes.partition_point(|&v| v <= x);
        Some(i.saturating_sub(1).min(self.nodes.len() - 2))
    }
}

/// Nodes on `[lo, hi]` refined towards `[focus_lo, focus_hi]`: the step at
/// distance `x` from the focus is `spacing(x)`, limited to `growth` times
/// the previous step. Inside the focus the step is `spacing(0)`.
pub fn graded_nodes(
    lo: f64,
    hi: f64,
    focus: (f64, f64),
    spacing: impl Fn(f64) -> f64,
    growth: f64,
) -> Vec<f64> {
    let f_lo = focus.0.clamp(lo, hi);
    let f_hi = focus.1.clamp(f_lo, hi);
    let h0 = spacing(0.0);
    let cells = ((f_hi - f_lo) / h0).round().max(0.0) as usize;
    let h_in = if cells > 0 { (f_hi - f_lo) / cells as f64 } else { h0 };
    let mut out: Vec<f64> = (0..=cells).map(|i| f_lo + i as f64 * h_in).collect();
    let walk = |start: f64, end: f64, sign: f64| {
        let mut pts = Vec::new();
        let (mut x, mut step) = (start, h_in);
        while sign * (end - x) > 1e-12 {
            step = spacing((x - start).abs()).min(growth * step).max(step);
            let next = x + sign * step;
            // absorb a short remainder into the last cell
            x = if sign * (end - next) < 0.5 * step { end } else { next };
            pts.push(x);
        }
        pts
    };
    let mut below = walk(f_lo, lo, -1.0);
    below.reverse();
    let above = walk(*out.last().unwrap(), hi, 1.0);
    below.append(&mut out);
    below.extend(above);
    below
}

/// Step law `κ · max(x, δ)^{3/2}`: keeps the five-point truncation error of
/// `Δ_h U ~ h²/d⁵` a fixed fraction `2κ²` of the absorption scale `d^{−2}`.
fn singular_spacing(kappa: f64, delta: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| kappa * x.max(delta).powf(1.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NodeRole {
    Interior,
    /// Dirichlet node: excision surface, outer boundary or axis end.
    Boundary,
    Outside,
}

/// Circle data for the reduced modes.
#[derive(Debug, Clone, PartialEq)]
struct CircleTrack {
    radius: f64,
    plane: (usize, usize),
    center: Vec<f64>,
    /// Translation axis and profile for the reduced-3d mode.
    shift: Option<(usize, Profile)>,
    rest: Vec<usize>,
}

impl CircleTrack {
    fn center_at(&self, t: f64) -> Vec<f64> {
        let mut c = self.center.clone();
        if let Some((k, prof)) = &self.shift {
            c[*k] += prof.value(t);
        }
        c
    }
}

#[derive(Debug, Clone)]
pub struct ExcisedGrid {
    pub mode: CoordinateMode,
    pub axes: Vec<GridAxis>,
    /// Ambient coordinate carried by each axis.
    pub embedding: Vec<usize>,
    pub ambient: usize,
    pub times: Vec<f64>,
    pub delta_exc: f64,
    pub outer_radius: f64,
    pub exhaustion_index: Option<usize>,
    pub roles: Vec<Vec<NodeRole>>,
    pub distance: Vec<Vec<f64>>,
    strides: Vec<usize>,
    track: Option<CircleTrack>,
}

impl ExcisedGrid {
    pub fn n_nodes(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    pub fn n_slices(&self) -> usize {
        self.times.len()
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn multi_index(&self, mut node: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (a, s) in self.strides.iter().enumerate() {
            idx[a] = node / s;
            node %= s;
        }
        idx
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.multi_index(node).iter().zip(&self.axes).map(|(&i, ax)| ax.nodes[i]).collect()
    }

    pub fn ambient_point(&self, node: usize) -> Vec<f64> {
        self.embed(&self.coords(node))
    }

    pub fn embed(&self, coords: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.ambient];
        for (c, &k) in coords.iter().zip(&self.embedding) {
            x[k] = *c;
        }
        x
    }

    /// Neighbor along `axis` in direction `±1` with the coupling coefficient
    /// `Π_{b≠axis} m_b · w(face)/h`.
    pub fn neighbors(&self, node: usize) -> Vec<(usize, f64)> {
        let idx = self.multi_index(node);
        let mut out = Vec::with_capacity(2 * self.axes.len());
        for (a, ax) in self.axes.iter().enumerate() {
            let others: f64 =
                idx.iter().zip(&self.axes).enumerate().filter(|(b, _)| *b != a).map(|(_, (&i, x))| x.measure[i]).product();
            if idx[a] > 0 {
                out.push((node - self.strides[a], others * ax.coupling[idx[a] - 1]));
            }
            if idx[a] + 1 < ax.len() {
                out.push((node + self.strides[a], others * ax.coupling[idx[a]]));
            }
        }
        out
    }

    /// Dual-cell measure `Π_a m_a`.
    pub fn measure(&self, node: usize) -> f64 {
        self.multi_index(node).iter().zip(&self.axes).map(|(&i, ax)| ax.measure[i]).product()
    }

    pub fn interior_count(&self, slice: usize) -> usize {
        self.roles[slice].iter().filter(|r| **r == NodeRole::Interior).count()
    }

    /// Whether the interior nodes of a slice form one connected set.
    pub fn interior_connected(&self, slice: usize) -> bool {
        let roles = &self.roles[slice];
        let mut uf = UnionFind::<usize>::new(roles.len());
        let mut first = None;
        for (i, r) in roles.iter().enumerate() {
            if *r != NodeRole::Interior {
                continue;
            }
            first.get_or_insert(i);
            for (j, _) in self.neighbors(i) {
                if roles[j] == NodeRole::Interior {
                    uf.union(i, j);
                }
            }
        }
        match first {
            None => false,
            Some(f) => roles.iter().enumerate().all(|(i, r)| *r != NodeRole::Interior || uf.equiv(i, f)),
        }
    }

    /// Distance to the moving circle in closed form; `None` without a track.
    pub fn track_distance(&self, coords: &[f64], t: f64) -> Option<f64> {
        let tr = self.track.as_ref()?;
        let x = self.embed(coords);
        let c = tr.center_at(t);
        let (i, j) = tr.plane;
        let rho = ((x[i] - c[i]).powi(2) + (x[j] - c[j]).powi(2)).sqrt();
        let rest: f64 = tr.rest.iter().map(|&k| (x[k] - c[k]).powi(2)).sum();
        Some(((rho - tr.radius).powi(2) + rest).sqrt())
    }

    /// Node coordinates of the circle's nearest point in the normal plane
    /// spanned by its radial direction and the remaining axes.
    pub(crate) fn shell_points(&self, d: f64, t: f64, count: usize) -> Result<Vec<Vec<f64>>> {
        let tr = self.track.as_ref().ok_or_else(|| Error::Config("shell sampling needs a reduced mode".into()))?;
        let c = tr.center_at(t);
        let angles = |k: usize| std::f64::consts::PI * (k as f64 + 0.5) / count as f64;
        Ok(match self.mode {
            CoordinateMode::Reduced2d => {
                (0..count).map(|k| vec![tr.radius + d * angles(k).cos(), d * angles(k).sin()]).collect()
            }
            CoordinateMode::Reduced3d => {
                let k3 = tr.shift.as_ref().map(|s| s.0).unwrap_or(self.embedding[1]);
                (0..count)
                    .flat_map(|k| {
                        let phi = angles(k);
                        (0..2).map(move |s| {
                            let psi = 0.25 * std::f64::consts::PI * (1 + 2 * s) as f64;
                            (phi, psi)
                        })
                    })
                    .map(|(phi, psi)| {
                        vec![tr.radius + d * phi.cos(), c[k3] + d * phi.sin() * psi.cos(), d * phi.sin() * psi.sin()]
                    })
                    .collect()
            }
            CoordinateMode::Full => return Err(Error::Config("shell sampling needs a reduced mode".into())),
        })
    }

    /// Multilinear interpolation of slice values at reduced coordinates;
    /// `None` if a corner is not active.
    pub fn interpolate(&self, values: &[f64], coords: &[f64]) -> Option<f64> {
        let mut base = 0;
        let mut frac = Vec::with_capacity(self.axes.len());
        for (a, ax) in self.axes.iter().enumerate() {
            let i = ax.cell_of(coords[a])?;
            base += i * self.strides[a];
            frac.push((coords[a] - ax.nodes[i]) / (ax.nodes[i + 1] - ax.nodes[i]));
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << self.axes.len()) {
            let mut w = 1.0;
            let mut node = base;
            for (a, f) in frac.iter().enumerate() {
                if corner >> a & 1 == 1 {
                    w *= f;
                    node += self.strides[a];
                } else {
                    w *= 1.0 - f;
                }
            }
            if w == 0.0 {
                continue;
            }
            let v = values[node];
            if !v.is_finite() {
                return None;
            }
            acc += w * v;
        }
        Some(acc)
    }

    /// Box grid without excision, for oracle runs.
    pub fn unexcised(mode: CoordinateMode, axes: Vec<GridAxis>, ambient: usize, embedding: Vec<usize>, times: Vec<f64>) -> Result<Self> {
        let mut g = ExcisedGrid::skeleton(mode, axes, ambient, embedding, times, 0.0, f64::INFINITY, None, None)?;
        let n = g.n_nodes();
        for s in 0..g.n_slices() {
            g.distance.push(vec![f64::INFINITY; n]);
            let roles = (0..n).map(|i| if g.on_box_edge(i) { NodeRole::Boundary } else { NodeRole::Interior }).collect();
            g.roles.push(roles);
            let _ = s;
        }
        Ok(g)
    }

    #[allow(clippy::too_many_arguments)]
    fn skeleton(
        mode: CoordinateMode,
        axes: Vec<GridAxis>,
        ambient: usize,
        embedding: Vec<usize>,
        times: Vec<f64>,
        delta_exc: f64,
        outer_radius: f64,
        exhaustion_index: Option<usize>,
        track: Option<CircleTrack>,
    ) -> Result<Self> {
        if times.len() < 2 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("time grid needs at least two increasing slices".into()));
        }
        let dt = times[1] - times[0];
        if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt) {
            return Err(Error::Config("time grid must be uniform".into()));
        }
        let mut strides = vec![1; axes.len()];
        for a in (0..axes.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * axes[a + 1].len();
        }
        Ok(ExcisedGrid {
            mode,
            axes,
            embedding,
            ambient,
            times,
            delta_exc,
            outer_radius,
            exhaustion_index,
            roles: Vec::new(),
            distance: Vec::new(),
            strides,
            track,
        })
    }

    fn on_box_edge(&self, node: usize) -> bool {
        self.multi_index(node).iter().zip(&self.axes).any(|(&i, ax)| {
            i + 1 == ax.len() || (i == 0 && ax.kind == AxisKind::Line)
        })
    }

    fn assign_roles(&mut self, mm: Option<&MovingManifold>) -> Result<()> {
        let n = self.n_nodes();
        self.roles.clear();
        self.distance.clear();
        for s in 0..self.n_slices() {
            let t = self.times[s];
            let mut dist = Vec::with_capacity(n);
            for i in 0..n {
                let c = self.coords(i);
                let d = match self.track_distance(&c, t) {
                    Some(d) => d,
                    None => distance(mm.expect("full mode needs the manifold"), &self.embed(&c), t, None)?.distance,
                };
                dist.push(d);
            }
            let mut roles: Vec<NodeRole> = (0..n)
                .map(|i| {
                    let r = self.ambient_point(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                    if dist[i] > self.delta_exc && r < self.outer_radius && !self.on_box_edge(i) {
                        NodeRole::Interior
                    } else {
                        NodeRole::Outside
                    }
                })
                .collect();
            for i in 0..n {
                if roles[i] == NodeRole::Interior {
                    for (j, _) in self.neighbors(i) {
                        if roles[j] == NodeRole::Outside {
                            roles[j] = NodeRole::Boundary;
                        }
                    }
                }
            }
            if roles.iter().zip(&dist).any(|(r, d)| *r == NodeRole::Boundary && !(*d > 0.0)) {
                return Err(Error::Config(format!(
                    "excision boundary at t = {t} touches the singular set; refine the grid"
                )));
            }
            self.roles.push(roles);
            self.distance.push(dist);
        }
        Ok(())
    }
}

/// `A_N = max{N, max_{t∈[0,N]} d(0, M_t) + 1}`.
pub fn outer_radius(mm: &MovingManifold, n_index: usize) -> Result<f64> {
    let origin = vec![0.0; mm.ambient()];
    let nf = n_index as f64;
    let mut worst: f64 = 0.0;
    for k in 0..=64 {
        let t = nf * k as f64 / 64.0;
        worst = worst.max(distance(mm, &origin, t, None)?.distance);
    }
    Ok(nf.max(worst + 1.0))
}

fn circle_track(mm: &MovingManifold, mode: CoordinateMode) -> Result<CircleTrack> {
    let mismatch = |why: &str| Error::Config(format!("{mode:?} symmetry reduction unavailable: {why}"));
    if mm.ambient() != 4 || mm.n_components() != 1 {
        return Err(mismatch("needs a single circle in R^4"));
    }
    let base = &mm.base;
    let Shape::Circle { radius, plane } = base.shape else {
        return Err(mismatch("manifold is not a circle"));
    };
    if base.frame.is_some() {
        return Err(mismatch("circle frame is rotated"));
    }
    let (i, j) = plane;
    if base.center[i] != 0.0 || base.center[j] != 0.0 {
        return Err(mismatch("circle is not centred on its rotation axis"));
    }
    let rest: Vec<usize> = (0..4).filter(|k| *k != i && *k != j).collect();
    let shift = match (&mm.motion.kind, mode) {
        (_, CoordinateMode::Reduced2d) if mm.is_static() => None,
        (MotionKind::Identity, CoordinateMode::Reduced3d) => Some((rest[0], Profile::Zero)),
        (MotionKind::Affine(a), CoordinateMode::Reduced3d)
            if a.scale.is_zero() && a.rotation.is_none() =>
        {
            let axis: Vec<usize> = (0..4).filter(|k| a.direction[*k] != 0.0).collect();
            if axis.len() != 1 || axis[0] == i || axis[0] == j {
                return Err(mismatch("translation must be along one axis orthogonal to the circle's plane"));
            }
            let k = axis[0];
            let prof = match a.shift {
                Profile::Linear { rate } => Profile::Linear { rate: rate * a.direction[k] },
                ref p if a.direction[k] == 1.0 => p.clone(),
                _ => return Err(mismatch("translation direction must be a unit axis vector")),
            };
            Some((k, prof))
        }
        _ => return Err(mismatch("motion does not commute with the reduced coordinates")),
    };
    if mode == CoordinateMode::Reduced2d && rest.iter().any(|&k| base.center[k] != 0.0) {
        return Err(mismatch("circle is off the orthogonal plane's origin"));
    }
    if mode == CoordinateMode::Reduced3d {
        let k = shift.as_ref().unwrap().0;
        let l = rest.iter().copied().find(|&x| x != k).unwrap();
        if base.center[l] != 0.0 {
            return Err(mismatch("circle is off the reflection hyperplane"));
        }
    }
    Ok(CircleTrack { radius, plane, center: base.center.clone(), shift, rest })
}

/// Excised grid for exhaustion index `n_index` (`δ_exc = 1/N`, outer radius
/// `A_N`, horizon `min(N, T)`), resolved as for index `resolution`.
pub fn build_grid_resolved(
    mm: &MovingManifold,
    settings: &SolverSettings,
    n_index: usize,
    resolution: usize,
) -> Result<ExcisedGrid> {
    settings.validate()?;
    if n_index == 0 || resolution < n_index {
        return Err(Error::Config("exhaustion index must be positive and not above the resolution index".into()));
    }
    mm.check_codimension()?;
    let delta = 1.0 / n_index as f64;
    let a_n = outer_radius(mm, n_index)?;
    let a_box = outer_radius(mm, resolution)?;
    let step = singular_spacing(settings.spacing, 1.0 / resolution as f64);
    let g = settings.growth;
    let horizon = settings.horizon.min(n_index as f64);
    let steps = (horizon / settings.dt).round().max(1.0) as usize;
    let times: Vec<f64> = (0..=steps).map(|k| horizon * k as f64 / steps as f64).collect();
    if times[0] <= mm.lower_time() {
        return Err(Error::Config("solver times must lie above the motion's lower time".into()));
    }
    let mode = settings.mode;
    let (axes, embedding, track) = match mode {
        CoordinateMode::Reduced2d | CoordinateMode::Reduced3d => {
            let tr = circle_track(mm, mode)?;
            let r = tr.radius;
            let radial = GridAxis::new(AxisKind::Radial { group: 2 }, graded_nodes(0.0, a_box, (r, r), &step, g))?;
            if mode == CoordinateMode::Reduced2d {
                let second = GridAxis::new(AxisKind::Radial { group: 2 }, graded_nodes(0.0, a_box, (0.0, 0.0), &step, g))?;
                (vec![radial, second], vec![tr.plane.0, tr.rest[0]], Some(tr))
            } else {
                let (k, _) = tr.shift.clone().unwrap();
                let l = tr.rest.iter().copied().find(|&x| x != k).unwrap();
                let track_k: Vec<f64> = times.iter().map(|&t| tr.center_at(t)[k]).collect();
                let lo = track_k.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = track_k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let line = GridAxis::new(AxisKind::Line, graded_nodes(-a_box, a_box, (lo, hi), &step, g))?;
                let refl = GridAxis::new(AxisKind::Radial { group: 1 }, graded_nodes(0.0, a_box, (0.0, 0.0), &step, g))?;
                (vec![radial, line, refl], vec![tr.plane.0, k, l], Some(tr))
            }
        }
        CoordinateMode::Full => {
            let n = mm.ambient();
            let axes = (0..n)
                .map(|k| {
                    let span: Vec<f64> = times
                        .iter()
                        .flat_map(|&t| {
                            mm.base.start_params(8).into_iter().map(move |th| mm.point(0, &th, t)[k])
                        })
                        .collect();
                    let lo = span.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = span.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    GridAxis::new(AxisKind::Line, graded_nodes(-a_box, a_box, (lo, hi), &step, g))
                })
                .collect::<Result<Vec<_>>>()?;
            let count: usize = axes.iter().map(|a| a.len()).product();
            if count > 200_000 {
                return Err(Error::Config(format!("full-dimensional grid has {count} nodes; use a reduced mode")));
            }
            (axes, (0..n).collect(), None)
        }
    };
    let mut grid =
        ExcisedGrid::skeleton(mode, axes, mm.ambient(), embedding, times, delta, a_n, Some(n_index), track)?;
    grid.assign_roles(Some(mm))?;
    Ok(grid)
}

pub fn build_grid(mm: &MovingManifold, settings: &SolverSettings, n_index: usize) -> Result<ExcisedGrid> {
    build_grid_resolved(mm, settings, n_index, n_index)
}
