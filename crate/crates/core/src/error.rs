use std::path::PathBuf;

use thiserror::Error;

use crate::label::Label;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("schema error: missing field `{0}`")]
    MissingField(String),

    #[error("row {row}: unknown label `{label}`")]
    UnknownLabel { row: usize, label: String },

    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("class `{class}` has {count} examples, need at least {needed}")]
    ClassTooSmall {
        class: Label,
        count: usize,
        needed: usize,
    },

    #[error("missing class `{0}` in training data")]
    MissingClass(Label),

    #[error("empty vocabulary")]
    EmptyVocabulary,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("diverged")]
    Diverged,

    #[error("lexicon line {line}: {msg}")]
    Lexicon { line: usize, msg: String },

    #[error("config: {0}")]
    Config(String),

    #[error("not a model file")]
    NotAModelFile,

    #[error("unsupported model format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: String, supported: u32 },

    #[error("malformed section `{section}`: {msg}")]
    Section { section: String, msg: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error beneath any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }
}
