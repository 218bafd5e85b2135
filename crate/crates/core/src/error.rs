use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the resolution pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: confidence {value} outside [0,1]")]
    Range {
        path: String,
        line: usize,
        value: f64,
    },

    #[error("ontology error: {0}")]
    Ontology(String),

    #[error("id collision: {0}")]
    Collision(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing display name for entity `{0}`")]
    MissingName(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("rule syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("rule `{rule}`: {message}")]
    InvalidRule { rule: String, message: String },

    #[error("value {0} outside [0,1]")]
    Domain(f64),

    #[error("dimension mismatch: expected {expected} values, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("non-finite value at iteration {iteration}")]
    Numerical { iteration: usize },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
