use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: parameters outside their admissible ranges or
    /// mutually incompatible resolutions.
    #[error("configuration error: {0}")]
    Config(String),
    /// A call-site argument violated an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// Test and reference runs are not driven by the same Brownian paths.
    #[error("decoupled runs: {0}")]
    Decoupled(String),
    /// An internal invariant failed; this is a bug, not a user error.
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
