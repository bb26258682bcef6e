use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid surface profile: {0}")]
    InvalidProfile(String),

    #[error("mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("unsupported operator `{0}`")]
    UnsupportedOperator(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("config file {path} not found")]
    ConfigMissing { path: PathBuf },

    #[error("{path}:{line}: syntax error: {message}")]
    ConfigSyntax { path: PathBuf, line: usize, message: String },

    #[error("{path}:{line}: unknown key `{key}`")]
    UnknownKey { path: PathBuf, line: usize, key: String },

    #[error("{location}: `{key}` out of range: {reason}")]
    OutOfRange { location: String, key: String, reason: String },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
