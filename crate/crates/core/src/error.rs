use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input that violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A value outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Instance too large for an exact method.
    #[error("{what}: size {size} exceeds limit {limit}")]
    Size {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    /// A strict-inequality system that admits no strictly feasible point.
    #[error("boundary-degenerate system: {0}")]
    Degenerate(String),

    /// An internal consistency check failed. Always a bug.
    #[error("invariant breach: {0}")]
    InvariantBreach(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
