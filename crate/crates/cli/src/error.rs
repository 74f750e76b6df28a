use std::fmt;

use olsr_core::Error as CoreError;

/// Process exit codes, one per error class. Success is 0.
pub mod exit {
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const IO: i32 = 3;
    pub const DIVERGENCE: i32 = 4;
    pub const DIMENSION: i32 = 5;
    pub const FORMAT: i32 = 6;
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(CoreError),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Core(e) => match e {
                CoreError::Io(_) => exit::IO,
                CoreError::Divergence { .. } | CoreError::NonFinite(_) => exit::DIVERGENCE,
                CoreError::Dimension(_) | CoreError::Shape(_) => exit::DIMENSION,
                CoreError::Format(_) => exit::FORMAT,
                CoreError::Parameter(_) => exit::CONFIG,
                _ => exit::OTHER,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(CoreError::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        match e.classify() {
            serde_json::error::Category::Io => CliError::Core(CoreError::Io(e.into())),
            _ => CliError::Core(CoreError::Format(e.to_string())),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
