use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("rule base has no active rules")]
    NoActiveRules,

    #[error("rule base of {count} rules exceeds the cap of {cap}")]
    SizeOverflow { count: u128, cap: usize },

    #[error("angle {0} degrees is outside (-90, 90)")]
    OutOfRange(f64),

    #[error("chromosome layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("empty population")]
    EmptyPopulation,

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("dataset is empty")]
    DatasetEmpty,

    #[error("dataset has {0} rows, at least 2 are required")]
    DatasetTooSmall(usize),

    #[error("column `{0}` has zero range")]
    ZeroRange(String),

    #[error("series has zero variance")]
    ZeroVariance,

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("row {row}, column `{column}`: value {value} outside [{lo}, {hi}]")]
    RangeViolation {
        row: usize,
        column: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    /// Short stable identifier, used as the diagnostic prefix by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::NoActiveRules => "no-active-rules",
            Error::SizeOverflow { .. } => "size-overflow",
            Error::OutOfRange(_) => "out-of-range",
            Error::LayoutMismatch(_) => "layout-mismatch",
            Error::EmptyPopulation => "empty-population",
            Error::ConfigInvalid(_) => "config-invalid",
            Error::DatasetEmpty => "dataset-empty",
            Error::DatasetTooSmall(_) => "dataset-too-small",
            Error::ZeroRange(_) => "zero-range",
            Error::ZeroVariance => "zero-variance",
            Error::Divergence { .. } => "divergence",
            Error::Io { .. } => "io-error",
            Error::Parse { .. } => "parse-error",
            Error::RangeViolation { .. } => "range-violation",
            Error::Serialization(_) => "serialization",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
