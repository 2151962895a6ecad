//! Block census and conditional next-symbol tables.
//!
//! Contexts are written most-recent-first: for a prediction at position `t`
//! the order-`k` context is `[s[t-1], s[t-2], .., s[t-k]]`. Dropping the last
//! element of a context therefore drops its oldest symbol, which is what the
//! back-off in [`crate::predictor`] relies on.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::coder::{CodingScheme, Symbol};
use crate::error::{Error, Result};

/// Hard cap on context order.
pub const MAX_ORDER: usize = 12;

/// Read access to a training region.
///
/// Table construction only ever asks for indices below `train_len()`. The
/// trait exists so that tests can observe every index that is read.
pub trait TrainingSource {
    fn train_len(&self) -> usize;
    fn symbol_at(&self, index: usize) -> Symbol;
}

impl TrainingSource for [Symbol] {
    fn train_len(&self) -> usize {
        self.len()
    }

    fn symbol_at(&self, index: usize) -> Symbol {
        self[index]
    }
}

impl TrainingSource for Vec<Symbol> {
    fn train_len(&self) -> usize {
        self.len()
    }

    fn symbol_at(&self, index: usize) -> Symbol {
        self[index]
    }
}

/// The first `split` symbols of a longer sequence.
#[derive(Debug, Clone, Copy)]
pub struct SplitView<'a> {
    symbols: &'a [Symbol],
    split: usize,
}

impl<'a> SplitView<'a> {
    pub fn new(symbols: &'a [Symbol], split: usize) -> Self {
        assert!(split <= symbols.len(), "split {split} past end {}", symbols.len());
        Self { symbols, split }
    }

    pub fn full(&self) -> &'a [Symbol] {
        self.symbols
    }

    pub fn split(&self) -> usize {
        self.split
    }
}

impl TrainingSource for SplitView<'_> {
    fn train_len(&self) -> usize {
        self.split
    }

    fn symbol_at(&self, index: usize) -> Symbol {
        self.symbols[index]
    }
}

/// A context of `k` symbols, most recent first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Block(pub Vec<Symbol>);

impl Block {
    /// The `k` symbols preceding position `t`, most recent first.
    pub fn preceding(seq: &[Symbol], t: usize, k: usize) -> Option<Self> {
        if k > t || t > seq.len() {
            return None;
        }
        Some(Block((1..=k).map(|i| seq[t - i]).collect()))
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Symbol-to-index lookup for encoding contexts as base-`|alphabet|` integers.
#[derive(Clone)]
struct Alphabet {
    symbols: Vec<Symbol>,
    index: [u8; 256],
}

impl Alphabet {
    const NONE: u8 = u8::MAX;

    fn new(symbols: &[Symbol]) -> Result<Self> {
        if symbols.is_empty() || symbols.len() >= usize::from(Self::NONE) {
            return Err(Error::InvalidConfig(format!("unsupported alphabet size {}", symbols.len())));
        }
        let mut index = [Self::NONE; 256];
        for (i, &s) in symbols.iter().enumerate() {
            index[(s as u8) as usize] = i as u8;
        }
        Ok(Self { symbols: symbols.to_vec(), index })
    }

    fn index_of(&self, s: Symbol) -> Option<usize> {
        match self.index[(s as u8) as usize] {
            Self::NONE => None,
            i => Some(usize::from(i)),
        }
    }

    fn base(&self) -> u64 {
        self.symbols.len() as u64
    }
}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Alphabet").field(&self.symbols).finish()
    }
}

/// Counts and normalized probabilities of the next symbol for one context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub counts: Vec<u64>,
    pub probabilities: Vec<f64>,
}

impl Row {
    fn from_counts(counts: Vec<u64>) -> Self {
        let total: u64 = counts.iter().sum();
        let probabilities = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Self { counts, probabilities }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct ConditionalTable {
    order: usize,
    alphabet: Alphabet,
    rows: BTreeMap<u64, Row>,
}

impl ConditionalTable {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, context: &Block) -> Option<&Row> {
        if context.order() != self.order {
            return None;
        }
        encode_context(&self.alphabet, context.symbols()).and_then(|key| self.rows.get(&key))
    }

    /// Rows in ascending order of their encoded context.
    pub fn rows(&self) -> impl Iterator<Item = (Block, &Row)> + '_ {
        self.rows.iter().map(|(&key, row)| (decode_context(&self.alphabet, key, self.order), row))
    }

    pub fn total_count(&self) -> u64 {
        self.rows.values().map(Row::total).sum()
    }
}

fn encode_context(alphabet: &Alphabet, context: &[Symbol]) -> Option<u64> {
    let base = alphabet.base();
    let mut key = 0u64;
    let mut weight = 1u64;
    for &s in context {
        key += alphabet.index_of(s)? as u64 * weight;
        weight *= base;
    }
    Some(key)
}

fn decode_context(alphabet: &Alphabet, mut key: u64, order: usize) -> Block {
    let base = alphabet.base();
    let mut out = Vec::with_capacity(order);
    for _ in 0..order {
        out.push(alphabet.symbols[(key % base) as usize]);
        key /= base;
    }
    Block(out)
}

/// Tables for orders `1..=k_max` plus the order-0 marginal.
#[derive(Debug, Clone)]
pub struct ConditionalTableSet {
    alphabet: Alphabet,
    tables: Vec<ConditionalTable>,
    marginal: Row,
    n_train: usize,
}

impl ConditionalTableSet {
    pub fn alphabet(&self) -> &[Symbol] {
        &self.alphabet.symbols
    }

    pub fn k_max(&self) -> usize {
        self.tables.len()
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    /// Table of order `k`, for `1 <= k <= k_max`.
    pub fn table(&self, k: usize) -> Option<&ConditionalTable> {
        k.checked_sub(1).and_then(|i| self.tables.get(i))
    }

    pub fn tables(&self) -> &[ConditionalTable] {
        &self.tables
    }

    pub fn marginal(&self) -> &Row {
        &self.marginal
    }

    /// Longest-suffix match for a most-recent-first context.
    ///
    /// Returns the largest `j <= context.len()` whose leading `j` symbols form
    /// a row of the order-`j` table, together with that row. `j = 0` means
    /// no context matched and the marginal is returned.
    pub fn longest_match(&self, context: &[Symbol]) -> (usize, &Row) {
        let depth = context.len().min(self.tables.len());
        let base = self.alphabet.base();
        let mut keys = [0u64; MAX_ORDER];
        let mut key = 0u64;
        let mut weight = 1u64;
        let mut usable = 0;
        for &s in &context[..depth] {
            let Some(idx) = self.alphabet.index_of(s) else { break };
            key += idx as u64 * weight;
            weight *= base;
            keys[usable] = key;
            usable += 1;
        }
        for j in (1..=usable).rev() {
            if let Some(row) = self.tables[j - 1].rows.get(&keys[j - 1]) {
                return (j, row);
            }
        }
        (0, &self.marginal)
    }

    pub fn to_dump(&self) -> TableSetDump {
        let row_dump = |r: &Row| RowDump { counts: r.counts.clone(), probabilities: r.probabilities.clone() };
        TableSetDump {
            alphabet: self.alphabet.symbols.clone(),
            n_train: self.n_train,
            marginal: row_dump(&self.marginal),
            tables: self
                .tables
                .iter()
                .map(|t| TableDump {
                    k: t.order,
                    rows: t.rows().map(|(ctx, row)| (ctx.to_string(), row_dump(row))).collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowDump {
    pub counts: Vec<u64>,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDump {
    pub k: usize,
    /// Keyed by context `"a1,a2,...,ak"`, most recent symbol first.
    pub rows: BTreeMap<String, RowDump>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSetDump {
    pub alphabet: Vec<Symbol>,
    pub n_train: usize,
    pub marginal: RowDump,
    pub tables: Vec<TableDump>,
}

fn check_order(k_max: usize, base: u64) -> Result<()> {
    if k_max == 0 || k_max > MAX_ORDER {
        return Err(Error::InvalidConfig(format!("order must be in 1..={MAX_ORDER}, got {k_max}")));
    }
    if base.checked_pow(k_max as u32).is_none() {
        return Err(Error::InvalidConfig(format!("alphabet of {base} symbols too large for order {k_max}")));
    }
    Ok(())
}

/// Counts next-symbol frequencies for every context of order `1..=k_max`
/// found in the training region.
///
/// Each position `t` in `k..train_len` contributes one count to the order-`k`
/// row of its preceding context, so order `k` holds `train_len - k` counts in
/// total. The marginal counts every training symbol.
pub fn build_conditional_tables<S: TrainingSource + ?Sized>(
    train: &S,
    k_max: usize,
    scheme: &CodingScheme,
) -> Result<ConditionalTableSet> {
    build_tables_for_alphabet(train, k_max, &scheme.symbols)
}

pub fn build_tables_for_alphabet<S: TrainingSource + ?Sized>(
    train: &S,
    k_max: usize,
    symbols: &[Symbol],
) -> Result<ConditionalTableSet> {
    let alphabet = Alphabet::new(symbols)?;
    check_order(k_max, alphabet.base())?;
    let n = train.train_len();
    if n < k_max + 1 {
        return Err(Error::SequenceTooShort { needed: k_max + 1, got: n });
    }
    let size = symbols.len();
    let indices = (0..n)
        .map(|i| {
            let s = train.symbol_at(i);
            alphabet.index_of(s).ok_or(Error::UnknownSymbol(s))
        })
        .collect::<Result<Vec<usize>>>()?;

    let mut counts: Vec<BTreeMap<u64, Vec<u64>>> = vec![BTreeMap::new(); k_max];
    let mut marginal = vec![0u64; size];
    let base = alphabet.base();
    for (t, &next) in indices.iter().enumerate() {
        marginal[next] += 1;
        let mut key = 0u64;
        let mut weight = 1u64;
        for k in 1..=k_max.min(t) {
            key += indices[t - k] as u64 * weight;
            weight *= base;
            counts[k - 1].entry(key).or_insert_with(|| vec![0; size])[next] += 1;
        }
    }

    let tables = counts
        .into_iter()
        .enumerate()
        .map(|(i, rows)| ConditionalTable {
            order: i + 1,
            alphabet: alphabet.clone(),
            rows: rows.into_iter().map(|(k, c)| (k, Row::from_counts(c))).collect(),
        })
        .collect();
    Ok(ConditionalTableSet { alphabet, tables, marginal: Row::from_counts(marginal), n_train: n })
}

/// Dense order-1 transition matrix, rows and columns in alphabet order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub symbols: Vec<Symbol>,
    pub rows: Vec<Vec<f64>>,
    /// Rows never observed in training carry the marginal instead.
    pub imputed: Vec<bool>,
}

pub fn transition_matrix(tables: &ConditionalTableSet) -> Result<TransitionMatrix> {
    let order1 = tables.table(1).ok_or(Error::OrderOutOfRange { order: 1, max: 0 })?;
    let mut rows = Vec::with_capacity(tables.alphabet().len());
    let mut imputed = Vec::with_capacity(tables.alphabet().len());
    for &s in tables.alphabet() {
        match order1.row(&Block(vec![s])) {
            Some(row) => {
                rows.push(row.probabilities.clone());
                imputed.push(false);
            }
            None => {
                rows.push(tables.marginal().probabilities.clone());
                imputed.push(true);
            }
        }
    }
    Ok(TransitionMatrix { symbols: tables.alphabet().to_vec(), rows, imputed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockCensus {
    pub k: usize,
    pub distinct: usize,
    pub max_possible: u64,
    pub total_windows: usize,
}

/// Number of distinct contiguous `k`-windows for each `k` in `1..=k_max`,
/// next to the `alphabet_size^k` possible blocks.
pub fn census_blocks(seq: &[Symbol], alphabet_size: usize, k_max: usize) -> Result<Vec<BlockCensus>> {
    if k_max == 0 {
        return Err(Error::InvalidConfig("k_max must be at least 1".into()));
    }
    if seq.len() < k_max {
        return Err(Error::SequenceTooShort { needed: k_max, got: seq.len() });
    }
    Ok((1..=k_max)
        .map(|k| {
            let distinct: HashSet<&[Symbol]> = seq.windows(k).collect();
            BlockCensus {
                k,
                distinct: distinct.len(),
                max_possible: (alphabet_size as u64).saturating_pow(k as u32),
                total_windows: seq.len() - k + 1,
            }
        })
        .collect())
}

pub fn write_census_csv<W: Write>(out: W, census: &[BlockCensus]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "distinct", "max_possible", "total_windows"])?;
    for c in census {
        w.write_record([
            c.k.to_string(),
            c.distinct.to_string(),
            c.max_possible.to_string(),
            c.total_windows.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
