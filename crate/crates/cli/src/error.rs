use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Solver(#[from] fracstep::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("cannot read config {path}: {source}")]
    ConfigFile {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("invalid config {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        source: toml::de::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::ConfigFile { .. } | CliError::ConfigParse { .. } => 2,
            CliError::Solver(fracstep::Error::InvalidParameter { .. })
            | CliError::Solver(fracstep::Error::UnsupportedOrder { .. }) => 2,
            CliError::Check(_) => 3,
            CliError::Solver(_) | CliError::Io { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
