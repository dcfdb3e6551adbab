use std::path::PathBuf;

use thiserror::Error;

/// Error type shared across the toolkit.
#[derive(Debug, Error)]
pub enum ThinlabError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file; the message names the offending field or line.
    #[error("{file}: {message}")]
    Parse { file: String, message: String },

    /// Invalid configuration (missing species, bad coefficient, bad search range).
    #[error("configuration error: {0}")]
    Config(String),

    /// A precondition of a numerical operation was violated.
    #[error("{0}")]
    Domain(String),

    /// Structurally valid input that cannot be executed (e.g. schedule past rotation end).
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A required upstream artifact (prior run output) is absent.
    #[error("missing dependency: {0}")]
    Missing(String),
}

pub type Result<T> = std::result::Result<T, ThinlabError>;

impl ThinlabError {
    /// Stable CLI exit code contract: 2 input error, 3 infeasible, 4 missing dependency.
    pub fn exit_code(&self) -> i32 {
        match self {
            ThinlabError::Io { .. } | ThinlabError::Parse { .. } | ThinlabError::Config(_) => 2,
            ThinlabError::Domain(_) | ThinlabError::Infeasible(_) => 3,
            ThinlabError::Missing(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ThinlabError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(file: impl Into<String>, message: impl Into<String>) -> Self {
        ThinlabError::Parse {
            file: file.into(),
            message: message.into(),
        }
    }
}
