//! Reduced-basis surrogate modeling for parametrized elliptic PDEs, with a
//! neural network whose output layer is the reduced-basis solver itself.
//!
//! The crate is organized as:
//! - [`numerics`]: dense/sparse linear algebra (SVD, LU, BiCGStab, products)
//! - [`fem`]: structured-mesh P1 finite elements for the two benchmark problems
//! - [`rom`]: POD, Galerkin projection, DEIM/MDEIM, online reduced solves
//! - [`neural`]: MLP with the reduced-solver output layer, Adam training
//! - [`pipeline`]: experiment orchestration, persistence, CLI
//!
//! Data-parallel loops run on rayon when the default `parallel` feature is
//! enabled and fall back to sequential execution otherwise; results are
//! bitwise identical either way.

pub mod error;
pub mod exec;
pub mod rng;

pub mod fem;
pub mod neural;
pub mod numerics;
pub mod pipeline;
pub mod rom;

pub use error::{Error, Result};
pub use exec::Exec;
