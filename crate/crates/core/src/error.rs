use std::path::PathBuf;

/// Error type shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A shape or hyperparameter is invalid for the requested operation.
    #[error("configuration error: {0}")]
    Config(String),

    /// An API was called out of order (e.g. backward before forward).
    #[error("usage error: {0}")]
    Usage(String),

    /// A data or checkpoint file could not be read or parsed.
    #[error("failed to load {path}: {reason}")]
    Load { path: PathBuf, reason: String },

    /// Training produced a non-finite loss.
    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch} (lr={lr})")]
    Diverged { epoch: usize, batch: usize, lr: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn load(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Load {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
