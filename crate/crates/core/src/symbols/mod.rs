//! Symbol-kernels, multiplier symbols and their numerical class estimators.

pub mod catalog;
pub mod estimates;
pub mod lemma;

pub use catalog::*;
pub use estimates::*;
pub use lemma::*;
