use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = RbmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RbmError {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{0}: batch is empty")]
    EmptyBatch(&'static str),

    #[error("spin entry at ({row}, {col}) is {value}, expected -1 or +1")]
    InvalidSpin { row: usize, col: usize, value: i8 },

    #[error("exact enumeration refused: {units} units exceeds the limit of {limit}")]
    TooLarge { units: usize, limit: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("IDX parse error at byte offset {offset}: {message}")]
    Idx { offset: u64, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RbmError {
    pub(crate) fn shape(context: &'static str, expected: usize, actual: usize) -> Self {
        RbmError::Shape {
            context,
            expected,
            actual,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RbmError::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(RbmError::shape(context, expected, actual))
    }
}
