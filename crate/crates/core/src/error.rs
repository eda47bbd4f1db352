//! Error types shared across the pipeline.

use thiserror::Error;

/// Errors produced by panel ingestion, preprocessing and forecasting.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input data (CSV parse failures, bad panels).
    #[error("input error: {0}")]
    Input(String),

    /// A configuration value outside its documented domain.
    #[error("config error: field `{field}`: {message}")]
    Config { field: String, message: String },

    /// A numerical routine could not produce a result (singular design,
    /// degenerate series, non-convergence without a usable fallback).
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: msg.into(),
        }
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Process exit code class: 2 for config/input problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
