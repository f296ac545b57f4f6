use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest {path}, row {row}: {message}")]
    Manifest {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("manifest {path}, row {row}: image {image} could not be loaded: {message}")]
    DanglingImage {
        path: PathBuf,
        row: usize,
        image: PathBuf,
        message: String,
    },

    #[error("need at least 3 manuscripts for leave-two-out splits, found {0}")]
    InsufficientManuscripts(usize),

    #[error("training set is empty for held-out pair {0:?}")]
    EmptyTrainingSet([String; 2]),

    #[error("held-out manuscripts {0:?} share no subword forms")]
    EmptyHeldoutSet([String; 2]),

    #[error("layer {layer}: {message}")]
    IncompatibleGeometry { layer: String, message: String },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("training diverged at epoch {epoch}: {message}")]
    Divergence { epoch: usize, message: String },

    #[error("cannot compute {0} over an empty set")]
    EmptySet(&'static str),

    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),

    #[error("cannot align an empty line ({0})")]
    EmptyLine(&'static str),

    #[error("documents have different line counts: left {left}, right {right}")]
    LinePairing { left: usize, right: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

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
}
