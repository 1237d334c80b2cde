//! Numerical verification kernel for the Zamolodchikov three-dimensional
//! lattice model: vertex-weight operators, the elliptic parameterisation of
//! the weights, geometric angle configurations, and residual checks of the
//! tetrahedron identity and its prismatic, static-elliptic and algebra
//! reductions.

pub mod elliptic;
pub mod error;
pub mod geometry;
pub mod mat;
pub mod param;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
