//! Reconstruction of return processes as variable-order Markov chains.
//!
//! The pipeline runs in four stages, each in its own module:
//!
//! - [`ingest`]: hourly price CSVs to log returns, summary statistics and the
//!   train/test split.
//! - [`coder`]: threshold alphabets that turn returns into symbols.
//! - [`markov`]: block census and conditional next-symbol tables for
//!   orders `1..=k_max`.
//! - [`predictor`]: back-off prediction on the held-out half, error metrics
//!   against a random baseline, and the repeated-run experiment driver.

pub mod coder;
pub mod error;
pub mod ingest;
pub mod markov;
pub mod predictor;

pub use coder::{CodingScheme, SchemeKind, Symbol, SymbolSequence};
pub use error::{Error, Result};
pub use ingest::{PricePoint, PriceSeries, ReturnSeries, SeriesStats};
pub use markov::{Block, BlockCensus, ConditionalTable, ConditionalTableSet};
pub use predictor::{ExperimentConfig, ExperimentReport, RandomStream, RunErrors};
