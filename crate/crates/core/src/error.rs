use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input does not match the feature schema or a known category.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Training produced a non-finite loss. The last finite checkpoint is
    /// written to `checkpoint` when one was available.
    #[error("training diverged at optimizer step {step}: {detail}")]
    Divergence {
        step: u64,
        detail: String,
        checkpoint: Option<PathBuf>,
    },

    #[error("replay buffer holds {have} experiences, batch needs {need}")]
    BufferUnderfull { have: usize, need: usize },

    #[error("missing baseline: {0}")]
    MissingBaseline(String),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
