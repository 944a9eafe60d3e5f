use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: tesmr_core::FormatError,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("missing embeddings: {0}")]
    MissingEmbeddings(String),
    #[error("embedding row count mismatch in {path}: expected {expected} rows, found {found}")]
    RowCount {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("service error: {0}")]
    Service(String),
    #[error("output directory {0} is locked by another run (remove the lock file if stale)")]
    Locked(PathBuf),
    #[error(transparent)]
    Core(#[from] tesmr_core::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Attaches a path to IO errors.
pub trait IoContext<T> {
    fn at(self, path: &std::path::Path) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: &std::path::Path) -> Result<T> {
        self.map_err(|e| Error::io(path, e))
    }
}
