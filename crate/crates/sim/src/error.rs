use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: coke_core::Error,
    },
    #[error("{0} diverged")]
    Diverged(String),
}

impl SimError {
    pub fn config(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        SimError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for the CLI.
    pub fn exit_code(&self) -> u8 {
        match self {
            SimError::Config { .. } => 1,
            SimError::Diverged(_) => 3,
            _ => 2,
        }
    }
}

/// Attaches a context string to core errors.
pub trait CoreContext<T> {
    fn context(self, context: impl Into<String>) -> Result<T>;
}

impl<T> CoreContext<T> for std::result::Result<T, coke_core::Error> {
    fn context(self, context: impl Into<String>) -> Result<T> {
        self.map_err(|source| SimError::Core {
            context: context.into(),
            source,
        })
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
