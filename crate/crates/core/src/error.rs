use thiserror::Error;

/// Errors surfaced by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("insufficient samples for class {class}: need {needed}, have {available}")]
    Shortage {
        class: usize,
        needed: usize,
        available: usize,
    },

    #[error("missing constant `{0}`")]
    MissingConstant(&'static str),

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
