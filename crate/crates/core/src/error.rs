use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("evaluation failed: {message}")]
    Evaluation {
        message: String,
        /// Captured stderr of an external evaluator, if any.
        stderr: Option<String>,
    },

    #[error("training failed for ensemble member {member}: {message}")]
    Training { member: usize, message: String },

    #[error("evolution failed at generation {generation}: {message}")]
    Evolution { generation: usize, message: String },

    #[error("failed to load {path}: {message}")]
    Load { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn evaluation(msg: impl Into<String>) -> Self {
        Error::Evaluation {
            message: msg.into(),
            stderr: None,
        }
    }

    pub(crate) fn load(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Load {
            path: path.into(),
            message: msg.into(),
        }
    }
}
