//! Minimizers of the quantum free energy `Tr(H₀ρ) + T Tr β(ρ)` under a
//! pointwise density constraint on a 1-D grid, and a battery of checks of
//! their Euler–Lagrange characterization.
//!
//! The crate is organized bottom-up:
//!
//! * [`grid`]: uniform grids, the forward-difference gradient and `L = DᵀWD`;
//! * [`state`]: density operators in kernel and spectral form, local moments;
//! * [`functionals`]: entropies, free energies, the log-Sobolev diagnostic;
//! * [`profile`], [`admissible`]: target densities and constraint-preserving maps;
//! * [`solvers`]: dual Newton, primal projected Newton, η sweeps, tiny-grid oracle;
//! * [`elverify`]: quadratic forms and the identities they satisfy at equilibrium;
//! * [`cli`]: configuration, orchestration and reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admissible;
pub mod cli;
pub mod elverify;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod profile;
pub mod solvers;
pub mod spectral;
pub mod state;

pub use error::{Error, Result};
