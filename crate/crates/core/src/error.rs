use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("duplicate subject id \"{0}\"")]
    DuplicateSubject(String),

    #[error("invalid label: {0}")]
    InvalidLabel(String),

    #[error("geometry mismatch: {0}")]
    Geometry(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("empty region mask")]
    EmptyMask,

    #[error("unknown dtype \"{0}\"")]
    UnknownDtype(String),

    #[error("single class present; at least two classes are required")]
    SingleClass,

    #[error("model checksum mismatch")]
    Checksum,

    #[error("unsupported model version {0}")]
    Version(u32),

    #[error("descriptor not fitted: {0}")]
    Unfitted(String),

    #[error("test labels requested before the evaluate stage (current stage: {0})")]
    Leakage(String),

    #[error("stage {stage}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    pub fn in_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Io { .. } | Error::Checksum => false,
            Error::Stage { source, .. } => source.is_validation(),
            _ => true,
        }
    }
}
