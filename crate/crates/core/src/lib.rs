//! Maximization of Steklov eigenvalues of planar domains under a diameter
//! constraint.
//!
//! Domains are parametrized by discrete support functions (convex mode) or by
//! a pair of graphs over a fixed segment (non-convex mode), meshed with a
//! Delaunay refiner, and solved with quadratic Lagrange elements reduced to
//! the boundary. Shape derivatives of the eigenvalues drive a projected
//! gradient ascent over the linear constraint polyhedron.

pub mod constraints;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod geometry;
pub mod gradient;
pub mod graphs;
pub mod mesh;
pub mod optimizer;

pub use error::{Error, Result};
