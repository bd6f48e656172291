use std::path::PathBuf;

use levi_core::LeviError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration at `{path}`: {reason}")]
    Config { path: String, reason: String },
    #[error("corrupt cache entry {file}: {reason}")]
    CacheCorrupt { file: PathBuf, reason: String },
    #[error("I/O failure on {file}: {source}")]
    Io {
        file: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot export: {0}")]
    Export(String),
    #[error(transparent)]
    Numeric(#[from] LeviError),
}

impl CliError {
    pub fn io(file: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let file = file.into();
        move |source| CliError::Io { file, source }
    }

    /// 2 for configuration problems, 3 for everything raised while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            _ => 3,
        }
    }
}
