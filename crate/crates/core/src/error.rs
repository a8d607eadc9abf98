//! Crate-wide error type.
//!
//! Errors are grouped by how the command-line front end must report them:
//! configuration/usage problems exit with code 1, data problems with code 2,
//! numerical failures with code 3.

use std::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Toolkit error.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid configuration value or CLI usage.
    Config(String),
    /// Missing, malformed or inconsistent input data.
    Data(String),
    /// Numerical failure: non-finite values, solver non-convergence.
    Numerical(String),
}

impl Error {
    /// Process exit code the CLI reports for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Data(_) => 2,
            Error::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Data(msg) => write!(f, "data error: {msg}"),
            Error::Numerical(msg) => write!(f, "numerical error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Data(err.to_string())
    }
}
