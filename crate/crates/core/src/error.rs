use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("validation error at row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: {message}")]
    NonFinite {
        epoch: usize,
        batch: usize,
        message: String,
    },

    #[error("both classes are required; no {0} labels present")]
    MissingClass(&'static str),

    #[error("standardizer leakage: {0}")]
    Leakage(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{module} failed for {coords}: {source}")]
    Run {
        module: &'static str,
        coords: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

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

    /// Wraps an error with the grid coordinates of the run that produced it.
    pub fn in_run(self, module: &'static str, coords: impl Into<String>) -> Self {
        Error::Run {
            module,
            coords: coords.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad inputs or configuration, as opposed to
    /// invariant violations discovered while running.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::Config(_)
            | Error::Parse { .. }
            | Error::Validation(_)
            | Error::Row { .. }
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::InvalidArgument(_) => true,
            Error::Run { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}
