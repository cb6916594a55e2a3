use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate document id `{0}`")]
    DuplicateDocument(String),

    #[error("invalid document: {0}")]
    InvalidDocument(String),

    #[error("unknown term `{0}`")]
    UnknownTerm(String),

    #[error("empty query: no query term has a term density")]
    EmptyQuery,

    #[error("degenerate density: eigenvalue sum {0} is not positive")]
    DegenerateDensity(f64),

    #[error("topic `{0}` has no relevance judgements")]
    UnknownTopic(String),

    #[error("no configuration matches {0}")]
    NoMatchingConfigs(String),

    #[error("paired t-test needs at least 2 paired samples of equal length (got {0} and {1})")]
    InsufficientSamples(usize, usize),

    #[error("term-density store format version {found} is not supported (expected {expected})")]
    StoreVersion { found: u32, expected: u32 },

    #[error("term-density store is corrupt or truncated: {0}")]
    StoreCorrupt(String),

    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid value `{value}` for {what}")]
    InvalidValue { what: &'static str, value: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
