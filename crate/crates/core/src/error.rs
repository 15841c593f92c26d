use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record at line {line}: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("duplicate article id `{0}`")]
    DuplicateId(String),

    #[error("empty corpus: {0}")]
    EmptyCorpus(&'static str),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("invalid pattern `{pattern}`: {message}")]
    Pattern { pattern: String, message: String },

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Error::Data(message.into())
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Pattern { .. } => 2,
            Error::Numeric(_) => 4,
            _ => 3,
        }
    }

    /// Short machine-readable kind used in error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::MalformedRecord { .. } => "malformed_record",
            Error::DuplicateId(_) => "duplicate_id",
            Error::EmptyCorpus(_) => "empty_corpus",
            Error::Data(_) => "data",
            Error::Config(_) => "config",
            Error::Pattern { .. } => "pattern",
            Error::Numeric(_) => "numeric",
        }
    }
}
