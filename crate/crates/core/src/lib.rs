//! Numerical laboratory for drift equations on the unit disk.
//!
//! The crate discretizes the elliptic drift equation `lap u + b . grad u = 0`
//! with piecewise linear elements, splits the drift through Dirichlet and
//! Neumann potentials, factors the gauged drift by a fixed point into a
//! gradient plus rotated gradient pair, rewrites the equation in divergence
//! form, and measures smoothness of solutions through oscillation decay. A
//! periodic spectral grid supplies Riesz transforms for the compensated
//! compactness diagnostics.

pub mod catalog;
pub mod driftsolve;
pub mod error;
pub mod fem;
pub mod field;
pub mod hardy;
pub mod hodge;
pub mod holder;
pub mod io;
pub mod mesh;
pub mod pipeline;
pub mod riviere;
pub mod sparse;
pub mod tol;

pub use error::{Error, Result};
