use thiserror::Error;

/// Error type shared by every module in this crate.
///
/// `Config` marks invalid user input (bad matrices, out-of-range parameters),
/// `Domain` marks mathematically undefined requests (n below the class
/// minimum, divergent series), `Numerical` marks solver breakdowns that
/// should never happen on valid input, and `Io` wraps filesystem failures
/// from the export helpers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
