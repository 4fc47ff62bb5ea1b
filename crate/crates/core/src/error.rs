use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure classes surfaced by the library.
///
/// Callers that need coarse handling (exit codes, retries) should go through
/// [`Error::category`] rather than matching every variant.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error: {message}")]
    Parse {
        message: String,
        /// (1-based data row, column name) of each offending cell.
        cells: Vec<(usize, String)>,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error(
        "lasso did not converge after {sweeps} sweeps (max KKT violation {kkt_violation:.3e})"
    )]
    NonConvergence {
        sweeps: usize,
        kkt_violation: f64,
        last_iterate: Vec<f64>,
    },

    #[error("singular {what} (condition number {condition:.3e})")]
    Singular { what: String, condition: f64 },

    #[error("target column `{0}` is collinear with the selected controls")]
    CollinearTarget(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::Config(_) => Category::Config,
            Error::Schema(_) | Error::Parse { .. } | Error::Data(_) | Error::Io { .. } => {
                Category::Data
            }
            Error::NonConvergence { .. }
            | Error::Singular { .. }
            | Error::CollinearTarget(_)
            | Error::Numerical(_) => Category::Numerical,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
