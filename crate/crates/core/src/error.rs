//! Error type shared by the solver modules.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum SolverError {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent or malformed arguments (bad bracket, a > x, ...).
    #[error("argument error: {0}")]
    Argument(String),

    /// A numerical procedure failed to converge or produced non-finite values.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A documented precondition (condition check) failed and no override was given.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The requested fast path does not cover this model/payoff combination.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An evaluation needs the zero-rate convention and it was not enabled.
    #[error("convention error: {0}")]
    Convention(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SolverError>;
