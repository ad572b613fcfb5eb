use std::path::PathBuf;

use thiserror::Error;

/// Everything that can stop a run, grouped by the exit code it maps to.
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] mcmclab_core::Error),

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("{0}")]
    Numeric(String),

    /// A distance curve never dropped below epsilon.
    #[error("no convergence below epsilon = {epsilon} within the time grid for d = {dim} (last value {last:.4}, noise floor {noise_floor:.4})")]
    Unbounded {
        dim: usize,
        epsilon: f64,
        last: f64,
        noise_floor: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    /// 2 usage, 3 numeric or I/O failure, 4 unbounded convergence time.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Core(e) if !e.is_numeric() => 2,
            Error::Core(_) | Error::Io { .. } | Error::Numeric(_) => 3,
            Error::Unbounded { .. } => 4,
        }
    }
}
