//! Stationary mean-field games with congestion on the periodic torus.
//!
//! The crate discretizes the coupled Hamilton-Jacobi / Fokker-Planck system
//!
//! ```text
//! u - Δu + m^α H(x, Du/m^α) + V(x, m) = 0
//! m - Δm - div(D_pH(x, Du/m^α) m)      = 1
//! ```
//!
//! with second-order finite differences, solves it by Newton continuation from an explicit
//! solution of a simpler homotopy endpoint, and evaluates a priori quantities (mass,
//! energy identity, entropy, inverse moments) on the result.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod json;
pub mod solver;
pub mod system;

pub use error::{MfgError, Result};
pub use grid::{ScalarField, TorusGrid, VectorField};
