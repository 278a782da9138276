//! Singular solutions of `∂_t u − Δu = −|u|^{p−1}u` along moving submanifolds.
//!
//! The crate evaluates the moving-manifold heat potential `U`, the tube
//! geometry around `M_t`, the super/sub-solution families built from powers
//! of `U`, the parabolic-capacity cutoff norms, and a monotone-iteration
//! solver on excised grids.

pub mod capacity;
pub mod comparison;
pub mod error;
pub mod geometry;
pub mod output;
pub mod potential;
pub mod quadrature;
pub mod rng;
pub mod scenario;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
