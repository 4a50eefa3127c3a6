use thiserror::Error;

/// Errors produced by the allocation, scheduling and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A scenario or load configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),
    /// The numeric search found no point satisfying the constraints.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// Exhaustive search refused because the candidate count exceeds the guard.
    #[error("exhaustive search refused: {count} combinations exceed the limit of {limit}")]
    TooManyCombinations { count: u128, limit: u128 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
