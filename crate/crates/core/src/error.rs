use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("grid mismatch: {expected} vs {found} pixels per side")]
    GridMismatch { expected: usize, found: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
