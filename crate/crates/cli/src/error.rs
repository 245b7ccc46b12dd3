use std::path::PathBuf;

use layercgh::{CghError, ErrorCategory};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CghError),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing input: {0}")]
    Input(String),

    #[error("i/o error on {0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
}

/// Process exit codes, one per error class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const NUMERIC: i32 = 3;
    pub const CONFIG: i32 = 4;
    pub const INPUT: i32 = 5;
    pub const FORMAT: i32 = 6;
    pub const IO: i32 = 7;
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e.category() {
                ErrorCategory::Numeric => exit::NUMERIC,
                ErrorCategory::Config => exit::CONFIG,
                ErrorCategory::Input => exit::INPUT,
                ErrorCategory::Format => exit::FORMAT,
                ErrorCategory::Io => exit::IO,
            },
            CliError::Config(_) => exit::CONFIG,
            CliError::Input(_) => exit::INPUT,
            CliError::Io(..) => exit::IO,
        }
    }

    pub fn label(&self) -> &'static str {
        match self.exit_code() {
            exit::NUMERIC => "numeric error",
            exit::CONFIG => "config error",
            exit::INPUT => "input error",
            exit::FORMAT => "format error",
            _ => "io error",
        }
    }
}
