use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid, region, solver or experiment parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// Two fields that must live on the same lattice do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A radius or point lies outside the range where a quantity is defined.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// A quantity is undefined at the requested point (singular derivative,
    /// vanishing normalisation, too few reliable samples).
    #[error("undefined: {0}")]
    Undefined(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
