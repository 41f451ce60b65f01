use thiserror::Error;

/// Errors raised across the simulator, learner and experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's contract (bad ordering, shape, empty input).
    #[error("usage error: {0}")]
    Usage(String),

    /// A state quantity stopped being finite during integration or training.
    #[error("non-finite value in {quantity}")]
    NonFinite { quantity: &'static str },

    /// A linear-algebra step could not be completed.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Configuration text or values failed validation.
    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
