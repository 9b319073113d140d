//! Crate-wide error type.

/// Errors produced by any stage of the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column '{0}'")]
    MissingColumn(String),

    #[error("severity '{0}' not in configured scale")]
    UnknownSeverity(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("dataset contains a single class: {0}")]
    SingleClass(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("target precision {target} unachievable; maximum achievable is {max}")]
    TargetUnachievable { target: f64, max: f64 },

    #[error("persistence: {0}")]
    Persist(String),

    #[error("{stage}: {message}")]
    Staged { stage: String, message: String },

    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;
