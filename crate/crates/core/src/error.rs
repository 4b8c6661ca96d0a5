//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the pipeline, grouped by the exit-code class a
/// command-line caller should map them to.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid flags, empty inputs, or API misuse.
    #[error("usage: {0}")]
    Usage(String),

    /// Malformed or inconsistent configuration values.
    #[error("config: {0}")]
    Config(String),

    /// Input file does not match the expected schema.
    #[error("schema: {0}")]
    Schema(String),

    /// Bad values inside an otherwise well-formed input.
    #[error("data: {0}")]
    Data(String),

    /// Missing or duplicate timestamp in an hourly series.
    #[error("gap: {0}")]
    Gap(String),

    /// Not enough observations for the requested operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Matrix or vector shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Non-finite values where finite arithmetic is required.
    #[error("numeric: {0}")]
    Numeric(String),

    /// Training diverged or failed to make progress.
    #[error("training: {0}")]
    Training(String),

    /// A precomputed kernel cache no longer matches the layer configuration.
    #[error("stale cache: {0}")]
    StaleCache(String),

    /// Requested output would exceed the configured memory budget.
    #[error("size: {0}")]
    Size(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit-code class: 1 usage, 2 data/config, 3 numeric/training.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Config(_)
            | Error::Schema(_)
            | Error::Data(_)
            | Error::Gap(_)
            | Error::InsufficientData(_)
            | Error::Dimension(_)
            | Error::StaleCache(_)
            | Error::Size(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            Error::Numeric(_) | Error::Training(_) => 3,
        }
    }
}
