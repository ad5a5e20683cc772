//! Scalar field theories on a Minkowski lattice: a Lagrangian language with
//! its variational calculus, an explicit evolution scheme, and constructors
//! and verifiers for nonlocal constants and conserved currents.

pub mod cli;
pub mod currents;
pub mod dsl;
pub mod dynamics;
pub mod lattice;
pub mod scalar;
pub mod solution;
pub mod theory;

pub use solution::Solution;
pub use theory::{Theory, TheoryError};
