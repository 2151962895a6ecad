//! Threshold alphabets mapping centered returns to integer symbols.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{ReturnSeries, SeriesStats};

/// Symbols are signed so that error metrics can subtract them directly.
pub type Symbol = i8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Five,
    Three,
}

impl SchemeKind {
    pub fn build(self, stats: &SeriesStats) -> Result<CodingScheme> {
        match self {
            SchemeKind::Five => make_five_symbol_scheme(stats),
            SchemeKind::Three => make_three_symbol_scheme(stats),
        }
    }
}

/// A partition of the real line into `symbols.len()` bands.
///
/// `cut_points` are increasing and expressed relative to the mean. Band `i`
/// is `(cut_points[i-1], cut_points[i]]`: upper bounds are inclusive, lower
/// bounds exclusive, and the outer bands are unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodingScheme {
    pub name: String,
    pub symbols: Vec<Symbol>,
    pub cut_points: Vec<f64>,
}

impl CodingScheme {
    pub fn new(name: impl Into<String>, symbols: Vec<Symbol>, cut_points: Vec<f64>) -> Result<Self> {
        if symbols.is_empty() || cut_points.len() + 1 != symbols.len() {
            return Err(Error::InvalidConfig(format!(
                "{} symbols need {} cut points, got {}",
                symbols.len(),
                symbols.len().saturating_sub(1),
                cut_points.len()
            )));
        }
        if !cut_points.windows(2).all(|w| w[0] < w[1]) || cut_points.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig("cut points must be finite and strictly increasing".into()));
        }
        if !symbols.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig("symbols must be strictly increasing".into()));
        }
        Ok(Self { name: name.into(), symbols, cut_points })
    }

    pub fn alphabet_size(&self) -> usize {
        self.symbols.len()
    }

    /// Band index of a centered value. NaN falls into the top band.
    pub fn band_of(&self, centered: f64) -> usize {
        self.cut_points.partition_point(|&c| c < centered)
    }

    pub fn classify(&self, centered: f64) -> Symbol {
        self.symbols[self.band_of(centered)]
    }

    pub fn index_of(&self, symbol: Symbol) -> Option<usize> {
        self.symbols.binary_search(&symbol).ok()
    }

    pub fn contains(&self, symbol: Symbol) -> bool {
        self.index_of(symbol).is_some()
    }

    /// Largest possible `|a - b|` between two symbols.
    pub fn span(&self) -> f64 {
        f64::from(self.symbols[self.symbols.len() - 1]) - f64::from(self.symbols[0])
    }
}

fn positive_std(stats: &SeriesStats) -> Result<f64> {
    if stats.std > 0.0 && stats.std.is_finite() {
        Ok(stats.std)
    } else {
        Err(Error::DegenerateStd)
    }
}

/// `{-2,-1,0,1,2}` with cuts at `-s, -s/3, s/3, s`.
pub fn make_five_symbol_scheme(stats: &SeriesStats) -> Result<CodingScheme> {
    let s = positive_std(stats)?;
    CodingScheme::new("five", vec![-2, -1, 0, 1, 2], vec![-s, -s / 3.0, s / 3.0, s])
}

/// `{-1,0,1}` with cuts at `-s, s`. The tails coincide with the five-symbol
/// scheme's outer bands.
pub fn make_three_symbol_scheme(stats: &SeriesStats) -> Result<CodingScheme> {
    let s = positive_std(stats)?;
    CodingScheme::new("three", vec![-1, 0, 1], vec![-s, s])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolSequence {
    pub instrument: String,
    pub scheme: String,
    pub symbols: Vec<Symbol>,
}

impl SymbolSequence {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Codes each `r_t - mean` with `scheme`.
pub fn encode_series(
    returns: &ReturnSeries,
    stats: &SeriesStats,
    scheme: &CodingScheme,
) -> Result<SymbolSequence> {
    positive_std(stats)?;
    let symbols = returns.values().iter().map(|r| scheme.classify(r - stats.mean)).collect();
    Ok(SymbolSequence {
        instrument: returns.instrument.clone(),
        scheme: scheme.name.clone(),
        symbols,
    })
}

/// Reproducibility record written next to a symbol dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolSidecar {
    pub instrument: String,
    pub scheme: String,
    pub symbols: Vec<Symbol>,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    pub cut_points: Vec<f64>,
}

impl SymbolSidecar {
    pub fn new(seq: &SymbolSequence, stats: &SeriesStats, scheme: &CodingScheme) -> Self {
        Self {
            instrument: seq.instrument.clone(),
            scheme: scheme.name.clone(),
            symbols: scheme.symbols.clone(),
            mean: stats.mean,
            std: stats.std,
            count: stats.count,
            cut_points: scheme.cut_points.clone(),
        }
    }
}

/// Single-column CSV with header `symbol`.
pub fn write_symbols_csv<W: Write>(mut out: W, seq: &SymbolSequence) -> Result<()> {
    writeln!(out, "symbol")?;
    for s in &seq.symbols {
        writeln!(out, "{s}")?;
    }
    Ok(())
}
