use std::path::{Path, PathBuf};

use thiserror::Error;

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_FORMAT: u8 = 4;
pub const EXIT_INVALID: u8 = 5;
pub const EXIT_NUMERICAL: u8 = 6;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: invalid config: {reason}", path.display())]
    Config { path: PathBuf, reason: String },

    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: qsm_core::Error },

    #[error(transparent)]
    Core(#[from] qsm_core::Error),

    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_owned(), source }
    }

    pub fn input(path: &Path, source: qsm_core::Error) -> Self {
        CliError::Input { path: path.to_owned(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
            CliError::Config { .. } => EXIT_FORMAT,
            CliError::Input { source, .. } | CliError::Core(source) => core_code(source),
            CliError::Other(_) => EXIT_OTHER,
        }
    }
}

fn core_code(e: &qsm_core::Error) -> u8 {
    use qsm_core::Error::*;
    match e {
        Io(_) => EXIT_IO,
        Format { .. } | Json(_) => EXIT_FORMAT,
        Diverged { .. } => EXIT_NUMERICAL,
        _ => EXIT_INVALID,
    }
}
