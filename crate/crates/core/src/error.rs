use std::io;

use thiserror::Error;

/// Errors produced anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("size mismatch: {0}")]
    Size(String),

    #[error("degenerate array geometry: {0}")]
    DegenerateGeometry(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("equalization singularity at user {user}, symbol {symbol}")]
    EqualizationSingularity { user: usize, symbol: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn size_err(msg: impl Into<String>) -> Error {
    Error::Size(msg.into())
}
