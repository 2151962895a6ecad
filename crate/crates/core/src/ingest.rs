//! Price ingestion, log returns and the train/test split.

use std::io::Write;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub timestamp: DateTime<Utc>,
    pub price: f64,
}

/// Prices for one instrument, sorted by strictly increasing timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    instrument: String,
    points: Vec<PricePoint>,
}

impl PriceSeries {
    /// Builds a series from points in any order. Points are sorted by
    /// timestamp; duplicates and non-positive prices are rejected.
    pub fn new(instrument: impl Into<String>, mut points: Vec<PricePoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::SeriesTooShort { needed: 2, got: points.len() });
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.price > 0.0) || !p.price.is_finite() {
                return Err(Error::NonPositivePrice { line: i as u64 + 1, price: p.price });
            }
        }
        points.sort_by_key(|p| p.timestamp);
        if let Some(i) = points.windows(2).position(|w| w[0].timestamp == w[1].timestamp) {
            return Err(Error::DuplicateTimestamp { line: i as u64 + 2 });
        }
        Ok(Self { instrument: instrument.into(), points })
    }

    pub fn instrument(&self) -> &str {
        &self.instrument
    }

    pub fn points(&self) -> &[PricePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub first: DateTime<Utc>,
    pub last: DateTime<Utc>,
}

/// Log returns of one instrument. Every value is finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub instrument: String,
    values: Vec<f64>,
    /// Timestamps of the first and last price used. Halves produced by
    /// [`split_halves`] carry no span.
    pub span: Option<Span>,
}

impl ReturnSeries {
    pub fn from_values(instrument: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("return at index {i} is not finite")));
        }
        Ok(Self { instrument: instrument.into(), values, span: None })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Mean and population standard deviation (divisor N).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl SeriesStats {
    pub fn of_values(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::SeriesTooShort { needed: 2, got: values.len() });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Ok(Self { mean, std: var.sqrt(), count: values.len() })
    }
}

/// Column names used to locate timestamp and price in a CSV header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub timestamp_column: String,
    pub price_column: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self { timestamp_column: "timestamp".into(), price_column: "price".into() }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub schema: CsvSchema,
    /// Skip rows whose timestamp or price cannot be parsed instead of failing.
    pub lenient: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadedPrices {
    pub series: PriceSeries,
    pub skipped: Vec<SkippedRow>,
}

/// Parses ISO-8601 / RFC 3339 timestamps (naive values are taken as UTC)
/// or integer epoch seconds.
pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let s = raw.trim();
    if !s.is_empty() && s.bytes().enumerate().all(|(i, b)| b.is_ascii_digit() || (i == 0 && b == b'-')) {
        return s.parse::<i64>().ok().and_then(|secs| DateTime::from_timestamp(secs, 0));
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    const NAIVE: [&str; 6] = [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
        "%Y-%m-%dT%H",
        "%Y-%m-%d %H",
    ];
    for fmt in NAIVE {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc())
}

fn resolve_column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .or_else(|| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name)))
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

/// Loads a price series from a CSV file with a header row.
///
/// Rows may appear in any order; the result is sorted by timestamp. Line
/// numbers in errors are 1-based file lines (the header is line 1).
pub fn load_price_csv(path: &Path, instrument: &str, opts: &LoadOptions) -> Result<LoadedPrices> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let file = std::fs::File::open(path)?;
    read_price_csv(file, instrument, opts)
}

pub fn read_price_csv<R: std::io::Read>(
    reader: R,
    instrument: &str,
    opts: &LoadOptions,
) -> Result<LoadedPrices> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let ts_col = resolve_column(&headers, &opts.schema.timestamp_column)?;
    let price_col = resolve_column(&headers, &opts.schema.price_column)?;

    let mut rows: Vec<(u64, PricePoint)> = Vec::new();
    let mut skipped = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed = parse_row(&record, ts_col, price_col);
        let (timestamp, price) = match parsed {
            Ok(v) => v,
            Err(reason) if opts.lenient => {
                skipped.push(SkippedRow { line, reason });
                continue;
            }
            Err(reason) => return Err(Error::MalformedRow { line, reason }),
        };
        if !(price > 0.0) {
            return Err(Error::NonPositivePrice { line, price });
        }
        rows.push((line, PricePoint { timestamp, price }));
    }

    if rows.len() < 2 {
        return Err(Error::SeriesTooShort { needed: 2, got: rows.len() });
    }
    rows.sort_by_key(|(_, p)| p.timestamp);
    for w in rows.windows(2) {
        if w[0].1.timestamp == w[1].1.timestamp {
            return Err(Error::DuplicateTimestamp { line: w[0].0.max(w[1].0) });
        }
    }
    let points = rows.into_iter().map(|(_, p)| p).collect();
    Ok(LoadedPrices { series: PriceSeries { instrument: instrument.to_string(), points }, skipped })
}

fn parse_row(
    record: &csv::StringRecord,
    ts_col: usize,
    price_col: usize,
) -> std::result::Result<(DateTime<Utc>, f64), String> {
    let raw_ts = record.get(ts_col).ok_or("missing timestamp field")?;
    let raw_price = record.get(price_col).ok_or("missing price field")?;
    let timestamp =
        parse_timestamp(raw_ts).ok_or_else(|| format!("unparseable timestamp {raw_ts:?}"))?;
    let price: f64 = raw_price.parse().map_err(|_| format!("unparseable price {raw_price:?}"))?;
    if price.is_nan() || price.is_infinite() {
        return Err(format!("non-finite price {raw_price:?}"));
    }
    Ok((timestamp, price))
}

/// Natural-log returns: `values[i] = ln(price[i+1]) - ln(price[i])`.
pub fn compute_log_returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    let pts = prices.points();
    if pts.len() < 2 {
        return Err(Error::SeriesTooShort { needed: 2, got: pts.len() });
    }
    let values = pts.windows(2).map(|w| w[1].price.ln() - w[0].price.ln()).collect();
    Ok(ReturnSeries {
        instrument: prices.instrument.clone(),
        values,
        span: Some(Span { first: pts[0].timestamp, last: pts[pts.len() - 1].timestamp }),
    })
}

pub fn compute_stats(returns: &ReturnSeries) -> Result<SeriesStats> {
    SeriesStats::of_values(returns.values())
}

/// Index at which the test half starts: `floor(n / 2)`.
pub fn split_index(len: usize) -> usize {
    len / 2
}

/// Splits into the first `floor(n/2)` values and the remainder, so an odd
/// extra element lands in the second half.
pub fn split_halves(returns: &ReturnSeries) -> Result<(ReturnSeries, ReturnSeries)> {
    if returns.len() < 4 {
        return Err(Error::SeriesTooShort { needed: 4, got: returns.len() });
    }
    let (h1, h2) = returns.values.split_at(split_index(returns.len()));
    let half = |v: &[f64]| ReturnSeries {
        instrument: returns.instrument.clone(),
        values: v.to_vec(),
        span: None,
    };
    Ok((half(h1), half(h2)))
}

/// Consecutive pairs `(r_t, r_{t+1})`.
pub fn phase_space_pairs(returns: &ReturnSeries) -> Result<Vec<(f64, f64)>> {
    if returns.len() < 2 {
        return Err(Error::SeriesTooShort { needed: 2, got: returns.len() });
    }
    Ok(returns.values.windows(2).map(|w| (w[0], w[1])).collect())
}

pub fn write_phase_space_csv<W: Write>(out: W, pairs: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r_t", "r_t_plus_1"])?;
    for (a, b) in pairs {
        w.write_record([a.to_string(), b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `timestamp,log_return`; each return is stamped with the later of
/// its two prices.
pub fn write_returns_csv<W: Write>(out: W, prices: &PriceSeries, returns: &ReturnSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "log_return"])?;
    for (p, r) in prices.points().iter().skip(1).zip(returns.values()) {
        w.write_record([p.timestamp.to_rfc3339(), r.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
