use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Serialize(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] iniquity_core::Error),
    /// Two independent computations disagree beyond tolerance.
    #[error("{0}")]
    Disagreement(String),
    /// The optimizer and its exhaustive oracle disagree.
    #[error("{0}")]
    OracleMismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Disagreement(_) => 1,
            CliError::OracleMismatch(_) => 2,
            CliError::Usage(_) | CliError::Read { .. } | CliError::Json { .. } => 64,
            CliError::Core(
                iniquity_core::Error::InvalidArgument(_) | iniquity_core::Error::TooLarge(_),
            ) => 64,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
