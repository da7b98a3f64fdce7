//! Parabolic Anderson model on the hypercube `{-1,+1}^n`.
//!
//! The solution of `∂v/∂t = κΔv + ξv` is driven by a random potential
//! `ξ` placed on the `2^n` vertices. This crate samples such potentials,
//! computes the principal eigenpairs of `κΔ + ξ` with Dirichlet conditions
//! on sets of high-potential vertices, integrates the equation in time,
//! estimates the solution by Feynman–Kac Monte Carlo, and runs parameter
//! sweeps over times `t = α c_n` with `c_n = ½ n ln n`.
//!
//! ```
//! use hypercube_pam::potential::sample_rem;
//! use hypercube_pam::spectral::principal_eig;
//!
//! let field = sample_rem(8, 1).unwrap();
//! let eig = principal_eig(1.0, &field, 1, 1, 1e-12).unwrap();
//! assert!(eig.lambda <= field.max_value());
//! ```

pub mod error;
pub mod evolution;
pub mod fkmc;
pub mod harness;
pub mod hypercube;
mod linalg;
pub mod potential;
pub mod rng;
pub mod spectral;

pub use error::{PamError, Result};
pub use hypercube::{Hamiltonian, StateVector, Vertex};
pub use potential::{PotentialField, TailModel};
