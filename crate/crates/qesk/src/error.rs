use std::path::PathBuf;

/// Error type shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A mandatory dataset file is absent.
    #[error("missing dataset file: {0}")]
    MissingFile(PathBuf),

    /// A record in a text input could not be interpreted.
    #[error("{file}:{line}: {message}")]
    Format {
        file: String,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Invalid run configuration (bad flag combination, empty grid, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A numeric routine failed (eigensolver breakdown, division hazard, ...).
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn format(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            file: file.into(),
            line,
            message: message.into(),
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
