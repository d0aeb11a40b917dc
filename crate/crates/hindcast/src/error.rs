//! Error type shared by all pipeline stages.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    /// Invalid parameters or inconsistent component configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data that does not satisfy a stage's preconditions.
    #[error("data error: {0}")]
    Data(String),

    /// Argument outside the valid domain of an evaluation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A linear solve failed or did not reach the required accuracy.
    #[error("solver error: {0}")]
    Solver(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("artifact serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }
}
