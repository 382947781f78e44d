use thiserror::Error;

/// Errors surfaced by the simulation library.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A run could not allocate enough message carriers after sampling.
    #[error("not enough signals: need {needed} message carriers, only {available} remain after sampling")]
    InsufficientSignals { needed: usize, available: usize },

    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, SimError>;
