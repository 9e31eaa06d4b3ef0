use std::path::{Path, PathBuf};

use thiserror::Error;

/// Process exit statuses.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const RESIDUAL_FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const RESOURCE_CAP: i32 = 3;
    pub const IO: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("resource cap reached: {source} (the path cap is set by `path_cap`)")]
    ResourceCap { source: eigenpath::Error },

    #[error("{0}")]
    Engine(eigenpath::Error),

    #[error("i/o error on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Engine(_) => exit::CONFIG,
            Self::ResourceCap { .. } => exit::RESOURCE_CAP,
            Self::Io { .. } => exit::IO,
        }
    }
}

impl From<eigenpath::Error> for CliError {
    fn from(e: eigenpath::Error) -> Self {
        use eigenpath::Error as E;
        match e {
            E::CapExceeded { .. } | E::QuadratureBudgetExceeded { .. } => Self::ResourceCap { source: e },
            other => Self::Engine(other),
        }
    }
}

/// Attaches a config path to engine errors that stem from a bad setting.
pub trait AtPath<T> {
    fn at(self, path: &str) -> Result<T, CliError>;
}

impl<T> AtPath<T> for eigenpath::Result<T> {
    fn at(self, path: &str) -> Result<T, CliError> {
        self.map_err(|e| match CliError::from(e) {
            CliError::Engine(e) => CliError::config(path, e.to_string()),
            other => other,
        })
    }
}
