use perfed_core::Error;
use thiserror::Error as ThisError;

/// Failure categories, each with its own exit status.
#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("numeric: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidArgument(_)
            | Error::Unsupported(_)
            | Error::MissingConstant(_)
            | Error::HypothesisViolation(_) => CliError::Config(msg),
            Error::Shortage { .. } | Error::Format(_) | Error::Io(_) | Error::Json(_) => CliError::Data(msg),
            Error::Numeric(_) | Error::Singular(_) => CliError::Numeric(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
