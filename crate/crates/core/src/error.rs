use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A cell or line of an input file could not be parsed. Rows and genes are 1-based.
    #[error("parse error at row {row}, gene {gene}: {message}")]
    Parse {
        row: usize,
        gene: usize,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("numerical failure in sweep {sweep} while updating {variable}")]
    Numerical { sweep: u64, variable: String },

    #[error("input exceeds oracle scale: {0}")]
    Scale(String),

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn numerical(sweep: u64, variable: impl Into<String>) -> Self {
        Error::Numerical {
            sweep,
            variable: variable.into(),
        }
    }

    /// Process exit code: 1 for problems with the user's inputs, 2 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. } | Error::Json(_) => 2,
            _ => 1,
        }
    }
}
