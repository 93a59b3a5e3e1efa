use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("not enough {what}: need {needed}, have {available}")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("cannot resample from an empty set")]
    EmptySource,

    #[error("no positive instances")]
    NoPositives,

    #[error("both classes must be present")]
    SingleClass,

    #[error("all paired differences are zero")]
    NoInformation,

    #[error("base model {index}: {source}")]
    Member {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("fold {index}: {source}")]
    Fold {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage} ({method}): {source}")]
    Stage {
        stage: &'static str,
        method: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{failed} of {total} repetitions failed")]
    ExperimentFailed { failed: usize, total: usize },

    #[error("every hyperparameter tuple failed: {}", .0.join("; "))]
    AllTuplesFailed(Vec<String>),

    #[error("malformed model file: {0}")]
    Model(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn member(index: usize, source: Error) -> Self {
        Error::Member {
            index,
            source: Box::new(source),
        }
    }

    pub(crate) fn fold(index: usize, source: Error) -> Self {
        Error::Fold {
            index,
            source: Box::new(source),
        }
    }

    pub(crate) fn stage(stage: &'static str, method: impl Into<String>, source: Error) -> Self {
        Error::Stage {
            stage,
            method: method.into(),
            source: Box::new(source),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
