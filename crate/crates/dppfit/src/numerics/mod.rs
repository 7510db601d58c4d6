//! Self-contained numerical kernel: special functions, quadrature,
//! rectangle geometry, root solvers, deterministic random streams.
//!
//! Everything here is pure given its inputs and safe to call from many
//! threads at once.

pub mod bessel;
mod dd;
pub mod distance;
pub mod grid;
pub mod linalg;
pub mod quad;
pub mod rng;
pub mod roots;
pub mod window;

pub use bessel::{bessel_j0, bessel_j1};
pub use distance::{distance_cdf, distance_measure_rule};
pub use grid::close_pairs;
pub use linalg::{LinalgError, Matrix};
pub use quad::{disc_quadrature, gauss_legendre_1d, gauss_legendre_2d, QuadError, QuadratureRule};
pub use rng::{SeedSpec, StreamLabel};
pub use roots::{brent_root, damped_newton, Box2, SolveError};
pub use window::{dist, Point, Window, WindowError};
