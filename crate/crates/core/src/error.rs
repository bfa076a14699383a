use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid problem or run configuration. Each entry names one offending
    /// key together with the constraint it violates.
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    /// Arrays that do not conform to the grid, mask or time axis.
    #[error("structural mismatch: {0}")]
    Structure(String),

    #[error("tridiagonal solve hit a zero pivot at row {row} (time step {step})")]
    LinearSolve { step: usize, row: usize },

    /// A precondition on the inputs (admissibility, support) does not hold.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(vec![msg.into()])
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
