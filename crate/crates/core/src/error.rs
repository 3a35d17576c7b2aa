use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("malformed file {path}:{line}: {message}")]
    MalformedFile {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("configuration error at `{key}`: {message}")]
    Configuration { key: String, message: String },

    #[error("singular {field} system at step {step}")]
    SingularSystem { field: String, step: usize },

    #[error(
        "{field} solve did not converge at step {step} after {iterations} iterations \
         (residual {residual:.3e})"
    )]
    ConvergenceFailure {
        field: String,
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Configuration {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConvergenceFailure { .. } | Error::SingularSystem { .. } => 2,
            Error::Io { .. } => 3,
            _ => 1,
        }
    }
}
