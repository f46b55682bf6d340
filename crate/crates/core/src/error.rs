use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file could not be parsed. `field` names the offending field or
    /// column when it is known.
    #[error("malformed data in {path} (field `{field}`): {message}")]
    Format {
        path: PathBuf,
        field: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// Training data that the requested learner cannot fit, e.g. a single class.
    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("infeasible calibration target for detector `{detector}`: derived false-fire rate {rate} is outside (0, 1)")]
    InfeasibleTarget { detector: String, rate: f64 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(
        path: impl Into<PathBuf>,
        field: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Format {
            path: path.into(),
            field: field.into(),
            message: message.into(),
        }
    }
}
