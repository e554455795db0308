use thiserror::Error;

/// Errors raised by the solver and its harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An invalid parameter or configuration key. The string names the offending item.
    #[error("configuration error: {0}")]
    Config(String),

    /// Non-finite values in a state, or an eigensolver failure.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code of the command-line front end for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::Numerical(_) => 3,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
