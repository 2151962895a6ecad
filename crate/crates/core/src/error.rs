use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("non-positive price {price} at line {line}")]
    NonPositivePrice { line: u64, price: f64 },

    #[error("duplicate timestamp at line {line}")]
    DuplicateTimestamp { line: u64 },

    #[error("series too short: need at least {needed} values, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("standard deviation is zero; thresholds are undefined")]
    DegenerateStd,

    #[error("symbol sequence too short: need at least {needed} symbols, got {got}")]
    SequenceTooShort { needed: usize, got: usize },

    #[error("symbol {0} is not in the alphabet")]
    UnknownSymbol(i8),

    #[error("test half is empty (split index {split}, length {len})")]
    SplitTooSmall { split: usize, len: usize },

    #[error("order {order} exceeds the table set maximum {max}")]
    OrderOutOfRange { order: usize, max: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// True for failures that originate in reading or validating input data.
    pub fn is_ingest(&self) -> bool {
        matches!(
            self,
            Error::FileNotFound(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::MissingColumn(_)
                | Error::MalformedRow { .. }
                | Error::NonPositivePrice { .. }
                | Error::DuplicateTimestamp { .. }
        )
    }
}
