use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("enumeration too large: {0}")]
    EnumerationTooLarge(String),

    #[error("estimator undefined: {0}")]
    EstimatorUndefined(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable, machine-parseable category name.
    pub fn category(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::EnumerationTooLarge(_) => "enumeration-too-large",
            Error::EstimatorUndefined(_) => "estimator-undefined",
            Error::InvalidQuery(_) => "invalid-query",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "parse",
            Error::Csv(_) => "parse",
        }
    }

    /// Process exit code used by the CLI for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DimensionMismatch(_) => 3,
            Error::InvalidParameter(_) => 4,
            Error::EnumerationTooLarge(_) => 5,
            Error::EstimatorUndefined(_) => 6,
            Error::InvalidQuery(_) => 7,
            Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => 8,
            Error::Config(_) => 9,
            Error::Io(_) => 10,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
