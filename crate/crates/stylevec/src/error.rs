use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("no context words available")]
    NoContext,
    #[error("numeric overflow")]
    NumericOverflow,
    #[error("undefined correlation: ranks are constant")]
    UndefinedCorrelation,
    #[error("not enough usable items: {0}")]
    InsufficientData(String),
    #[error("word not in vocabulary: {0:?}")]
    UnknownWord(String),
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Attach a file path to an error produced while reading that file.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Error {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
