//! Base manifolds, motions and tube geometry.

pub mod bounds;
pub mod chart;
pub mod distance;
pub mod manifold;
pub mod motion;
pub mod shell;
pub mod surface;

pub use manifold::{area_element, Axis, Jet, MovingManifold, ParametricManifold, Shape};
pub use motion::{
    validate_motion, AffineMotion, CustomMotion, MotionFamily, MotionKind, MotionSnapshot,
    MotionValidation, PlaneRotation, Profile,
};
pub use distance::{distance, NearestPointResult};
pub use surface::{surface_integral, SurfaceQuadrature};
pub use bounds::{curvature_bound, embedding_constant, tube_radius, GeometryBounds, BoundsOptions};
pub use chart::{langer_chart, HeightJet, LangerChart};
pub use shell::{shell_integral, shell_bounds, ShellIntegral, ShellResolution};
