use thiserror::Error;

/// Errors raised by grid construction, symbol evaluation, norms and solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside the range an operation accepts.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The spectral parameter (or an evaluation point) lies outside the domain of a symbol.
    #[error("domain error: {0}")]
    Domain(String),

    /// Fields or operators that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A norm family was applied to a field kind it is not defined on.
    #[error("norm {norm} is not defined on {field}")]
    NormMismatch { norm: String, field: &'static str },

    /// The requested combination is not supported by the solver.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
