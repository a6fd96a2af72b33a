//! Topological derivatives for (non)linear elliptic PDE-constrained
//! problems in 2D: P1 finite elements with forward-mode AD, corrector
//! problems on a truncated ball, the three-term derivative formula, Taylor
//! tests and full-domain derivative maps via corrector superposition.

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod corrector;
pub mod error;
pub mod fieldeval;
pub mod fem;
pub mod mesh;
pub mod problem;
pub mod taylor;
pub mod tdcore;

pub use error::{Error, Result};

/// A point of R².
pub type Point = [f64; 2];

/// Spatial dimension.
pub const DIM: usize = 2;
