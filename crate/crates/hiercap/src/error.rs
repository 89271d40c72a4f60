use std::path::PathBuf;

/// Every failure carries a short machine-readable kind, printed as the
/// `error[<kind>]:` prefix by the CLI.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{what} at byte {offset}")]
    Format { what: String, offset: usize },
    #[error("{file}:{line}: {what}")]
    Parse {
        file: String,
        line: usize,
        what: String,
    },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] hiercap_core::Error),
}

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Core(hiercap_core::Error::Config(_)) => "config",
            Error::Core(hiercap_core::Error::NonFinite(_)) => "diverged",
            Error::Core(_) => "model",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: impl Into<String>, offset: usize) -> Self {
        Error::Format {
            what: what.into(),
            offset,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
