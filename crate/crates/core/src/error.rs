use alloc::boxed::Box;
use alloc::string::String;

/// Errors raised by the core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Invalid shapes, ranges or combinations of settings.
    #[error("configuration error: {0}")]
    Config(String),
    /// NaN/Inf encountered where finite values are required.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Pseudo-label state used before it was initialized.
    #[error("state error: {0}")]
    State(String),
    /// Federation protocol misuse (e.g. aggregating zero updates).
    #[error("protocol error: {0}")]
    Protocol(String),
    /// An error raised while executing a given round.
    #[error("round {round}: {source}")]
    Round {
        /// Round index at which the failure happened.
        round: usize,
        /// Underlying failure.
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Wraps `self` with the round it happened in.
    pub fn at_round(self, round: usize) -> Self {
        match self {
            e @ Error::Round { .. } => e,
            e => Error::Round {
                round,
                source: Box::new(e),
            },
        }
    }
}

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
