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

    #[error(transparent)]
    Stream(#[from] std::io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: invalid JSON record: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid term {0:?}")]
    InvalidTerm(String),

    #[error("invalid atom: {0}")]
    InvalidAtom(String),

    #[error("sentence index {index} out of range (corpus has {len} sentences)")]
    SentenceOutOfRange { index: usize, len: usize },

    #[error("ontology: {0}")]
    Ontology(String),

    #[error("embeddings: {0}")]
    Embedding(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    Dimension {
        what: String,
        expected: usize,
        actual: usize,
    },

    #[error("cannot corrupt {arity}-ary facts: vocabulary has {available} predicate(s) of that arity, need at least 2")]
    NoCorruption { arity: usize, available: usize },

    #[error("unknown {kind} {name:?}")]
    Unknown { kind: &'static str, name: String },

    #[error("missing features for video {0:?}")]
    MissingFeatures(String),

    #[error("model: {0}")]
    Model(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
