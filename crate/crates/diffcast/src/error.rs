//! Error taxonomy shared by the library, the CLI and the C interface.
//!
//! The three categories map one-to-one onto CLI exit codes (config/usage = 1,
//! data = 2, numeric = 3), so every fallible operation below picks the
//! category the caller should react to, not where the failure happened.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration, unknown keys, out-of-range hyperparameters.
    #[error("config error: {0}")]
    Config(String),

    /// Unreadable, malformed or insufficient input data.
    #[error("data error: {0}")]
    Data(String),

    /// Non-finite values produced where finite ones are required.
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl Error {
    /// Process exit code for the CLI and status code base for the C API.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Data(_) => 2,
            Error::Numeric(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Shorthand used by loaders: IO problems are data problems for the caller.
pub fn io_data(context: &str, err: std::io::Error) -> Error {
    Error::Data(format!("{context}: {err}"))
}
