use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}: no check-ins found")]
    EmptyInput(PathBuf),

    #[error("no users with at least two check-ins remain after ingestion")]
    NoUsableUsers,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in {context} (epoch {epoch}, step {step})")]
    NonFinite {
        context: &'static str,
        epoch: usize,
        step: usize,
    },

    #[error("non-finite value in {0}")]
    NonFiniteValue(&'static str),

    #[error("embedding file is missing {} POI token(s): {}", .0.len(), .0.join(", "))]
    MissingTokens(Vec<String>),

    #[error("embedding file {path}: {message}")]
    EmbeddingFormat { path: PathBuf, message: String },

    #[error("corpus cache version mismatch: expected {expected}, found {found}")]
    CacheVersion { expected: u32, found: u32 },

    #[error("corpus has no training pairs")]
    NoTrainingData,

    #[error("no users are evaluable (each needs non-empty train and test parts)")]
    NoEvaluableUsers,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
