//! Fractional Laplacians on hyperbolic space H^n (n = 2, 3): spectral calculus,
//! heat-semigroup and singular-integral realizations, nonlocal exterior-value
//! solvers with their Dirichlet-to-Neumann maps, moment analysis for
//! entanglement, and potential recovery from DN data.

pub mod entangle;
pub mod error;
pub mod geometry;
pub mod inverse;
pub mod io;
pub mod operator;
pub mod quadrature;
pub mod solver;
pub mod scalar;
pub mod specfun;
pub mod spectral;

pub use error::{Error, Result};
pub use geometry::Dim;
pub use scalar::Real;

/// Double-precision point on the hyperboloid.
pub type HyperPoint = geometry::HyperPoint<f64>;
/// Double-precision geodesic polar coordinates.
pub type PolarCoord = geometry::PolarCoord<f64>;
