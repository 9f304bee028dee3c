//! Crate-wide error type.

use std::path::PathBuf;

use devdiet_nn::StructureMismatch;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("schedule construction: {0}")]
    Schedule(String),

    #[error("epoch {epoch} is outside a {total}-epoch schedule")]
    EpochOutOfRange { epoch: u32, total: u32 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("unknown corruption type `{0}`")]
    UnknownCorruption(String),

    #[error("sampling: {0}")]
    Sampling(String),

    #[error("numeric: {0}")]
    Numeric(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("incomplete error grid: no predictions for {0}")]
    IncompleteGrid(String),

    #[error("{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("data: {0}")]
    Data(String),

    #[error("{path}: {msg}")]
    Ingest { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("training diverged at epoch {epoch}: {detail}; last good checkpoint: {}",
        .checkpoint.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into()))]
    Divergence { epoch: u32, detail: String, checkpoint: Option<PathBuf> },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Structure(#[from] StructureMismatch),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn ingest(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Ingest { path: path.into(), msg: msg.into() }
    }

    /// Process exit code: 2 configuration, 3 data, 4 divergence, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Schedule(_) | Error::Argument(_) | Error::UnknownCorruption(_) => 2,
            Error::Data(_) | Error::Ingest { .. } | Error::Io { .. } | Error::Sampling(_) | Error::IncompleteGrid(_) => 3,
            Error::Divergence { .. } => 4,
            _ => 1,
        }
    }
}
