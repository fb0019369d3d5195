//! Eigenvalue solvers for the two-dimensional linear elasticity problem
//! `-div sigma(u) = gamma u` on polygonal domains.
//!
//! Discretizations: a weak Galerkin method on triangles (direct and
//! two-grid), and an enriched Crouzeix-Raviart element with its
//! pressure formulation eliminated.

pub mod basis;
pub mod ecr;
pub mod eigen;
pub mod error;
pub mod mesh;
pub mod sparse;
pub mod study;
pub mod two_grid;
pub mod wg;

pub use error::{Error, Result};
