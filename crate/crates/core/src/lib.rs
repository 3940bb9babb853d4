//! Numerical toolkit for parameter-dependent Poisson operators on the half-space:
//! symbol-kernels and their class estimators, Fourier multipliers on a
//! periodized boundary, function-space norms, R-bound estimation, and
//! resolvents of dynamic boundary problems.

pub mod dynbc;
pub mod error;
pub mod experiments;
pub mod fd;
pub mod grid;
pub mod norms;
pub mod rbound;
pub mod symbols;
pub mod transforms;

pub use error::{Error, Result};
pub use grid::*;
