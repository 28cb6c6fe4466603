use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Config(String),
    #[error("tracking lost at frame {frame}: {reason}")]
    TrackingLost { frame: usize, reason: String },
    #[error("{0}")]
    Check(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) | CliError::Check(_) => 2,
            CliError::TrackingLost { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
