use std::path::Path;

use thiserror::Error;

use crate::kg::Sctid;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown concept {0}")]
    NotFound(Sctid),

    #[error("infeasible split: {0}")]
    Infeasible(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(path: &str, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// True for errors caused by bad input or configuration rather than by
    /// the run itself (the CLI maps these to exit code 1).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Validation(_) | Error::NotFound(_) | Error::Config(_) | Error::Infeasible(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes a file, creating missing parent directories.
pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}
