//! Numerical laboratory for the mass-constrained anisotropic free-energy problem.
//!
//! The library computes minimizing shapes of `E(E) = F(E) + G(E)` at fixed volume,
//! where `F` integrates a 1-homogeneous surface tension over the boundary and `G`
//! integrates a nonnegative potential over the region.  It verifies the
//! first-variation identity `H_f = mu - g` on converged minimizers, solves the
//! associated quasilinear graph equation with its Hessian-determinant diagnostics,
//! and estimates stability moduli and their mass scaling.

pub mod anisotropy;
pub mod energy;
pub mod error;
pub mod graphpde;
pub mod optimizer;
pub mod parallel;
pub mod potential;
pub mod shapes;
pub mod stability;

pub use error::{Result, WulffError};
