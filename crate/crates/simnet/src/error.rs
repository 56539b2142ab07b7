use thiserror::Error;

use snowfrost_core::CoreError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config: {0}")]
    Config(String),

    #[error("invalid config: {0}")]
    Invalid(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("trace line {line}: {message}")]
    Trace { line: usize, message: String },

    #[error("trace is truncated: no finish record")]
    TruncatedTrace,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
