//! Library surface behind the `opcnn` binary, exposed so integration tests
//! can drive the commands directly.

pub mod commands;
pub mod config;

use std::fmt;

/// Command failures carrying the documented exit codes:
/// 0 ok, 2 config error, 3 data error, 4 numeric failure.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<opcnn::Error> for CliError {
    fn from(e: opcnn::Error) -> Self {
        match e {
            opcnn::Error::Data(_) | opcnn::Error::Io { .. } => CliError::Data(e.to_string()),
            opcnn::Error::NonFinite(_) => CliError::Numeric(e.to_string()),
            opcnn::Error::Shape(_) | opcnn::Error::InvalidArgument(_) => {
                CliError::Config(e.to_string())
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
