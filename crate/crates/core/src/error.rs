use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("missing column '{column}' in {path}")]
    MissingColumn { column: String, path: PathBuf },

    #[error("line {line}: {message}")]
    MalformedRow { line: u64, message: String },

    #[error("too many malformed rows ({count} > {limit}); first at line {first_line}: {message}")]
    TooManyMalformed {
        count: usize,
        limit: usize,
        first_line: u64,
        message: String,
    },

    #[error("empty result: {0}")]
    EmptyResult(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown algorithm '{0}'")]
    UnknownAlgorithm(String),

    #[error("interaction at {interaction} is not before the current session start {current}")]
    NonPastInteraction { interaction: u64, current: u64 },

    #[error("unsupported model format version {found} (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True when the error was caused by the caller's input or configuration
    /// rather than by a defect in the pipeline itself.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::ModelVersion { .. })
    }
}
