use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input (dimension mismatch, empty data, bad partition).
    #[error("input error: {0}")]
    Input(String),

    /// A parameter outside its mathematical domain (non-positive precision, negative threshold).
    #[error("domain error: {0}")]
    Domain(String),

    /// A non-finite objective or estimate appeared during fitting.
    #[error("numerical error at iteration {iteration}: {message}")]
    Numerical { iteration: usize, message: String },

    /// Invalid experiment or run configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Tabular input that could not be parsed.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
