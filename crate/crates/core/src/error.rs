use std::path::PathBuf;

use crate::base::ExampleId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("no score for example {0}")]
    MissingScore(ExampleId),

    #[error("unknown example id {0}")]
    UnknownId(ExampleId),

    #[error("duplicate example id {0}")]
    DuplicateId(ExampleId),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("correlation is undefined: {0}")]
    DegenerateCorrelation(&'static str),

    #[error("training diverged at step {step} (loss {loss})")]
    Diverged { step: usize, loss: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad configuration or inputs that fail
    /// validation, as opposed to failures while computing or doing IO.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidInput(_)
                | Error::NonFinite { .. }
                | Error::MissingScore(_)
                | Error::UnknownId(_)
                | Error::DuplicateId(_)
        )
    }
}
