use std::fmt;

use thiserror::Error;

use crate::models::Checkpoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("batch norm running statistics are not initialized")]
    UninitializedStats,

    #[error("missing forward cache: {0}")]
    MissingCache(&'static str),

    #[error("non-finite gradient in parameter array {index}")]
    NonFiniteGradient { index: usize },

    #[error("training diverged at step {step}: {reason}")]
    Diverged {
        step: u64,
        reason: String,
        /// Model and optimizer state from before the failing step.
        last_good: Box<Checkpoint>,
    },

    #[error("unsupported image: {0}")]
    UnsupportedImage(String),

    #[error("malformed image header: {0}")]
    MalformedHeader(String),

    #[error("truncated data: {0}")]
    Truncated(String),

    #[error("not a checkpoint: {0}")]
    Format(String),

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u8, expected: u8 },

    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),

    #[error("{path}: {source}")]
    Path {
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn at_path(self, path: &std::path::Path) -> Self {
        Error::Path {
            path: path.display().to_string(),
            source: Box::new(self),
        }
    }

    /// Strips any path context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Path { source, .. } => source.root(),
            other => other,
        }
    }
}

// `Diverged` carries a whole model; keep debug output readable.
impl fmt::Debug for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Diverged { step, reason, .. } => f
                .debug_struct("Diverged")
                .field("step", step)
                .field("reason", reason)
                .finish_non_exhaustive(),
            other => fmt::Display::fmt(other, f),
        }
    }
}
