use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by the valuation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (negative time,
    /// reversed interval, recovery outside `[0, 1]`, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    /// The formula is well defined but degenerate at this input.
    #[error("singular input: {0}")]
    Singular(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    /// A self-check on computed values failed beyond its tolerance.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
