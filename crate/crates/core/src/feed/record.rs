use std::collections::HashSet;

use thiserror::Error;

/// One quote observation. Times are UTC epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuoteRecord {
    pub time: i64,
    pub close: f64,
    pub change: f64,
    /// Percentage points, carried verbatim from the source.
    pub pct_change: f64,
    /// Cumulative traded volume.
    pub volume: f64,
}

impl QuoteRecord {
    pub fn new(time: i64, close: f64, change: f64, pct_change: f64, volume: f64) -> Self {
        QuoteRecord { time, close, change, pct_change, volume }
    }

    pub fn validate(&self) -> Result<(), SourceError> {
        if self.time <= 0 {
            return Err(SourceError::new(format!("non-positive time {}", self.time)));
        }
        if !self.close.is_finite() || !self.change.is_finite() || !self.pct_change.is_finite() {
            return Err(SourceError::new("non-finite price field"));
        }
        if !(self.volume.is_finite() && self.volume >= 0.0) {
            return Err(SourceError::new(format!("invalid volume {}", self.volume)));
        }
        Ok(())
    }
}

/// Shortest decimal text that parses back to exactly `value`.
pub fn canonical_float(value: f64) -> String {
    format!("{value}")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct SourceError {
    pub message: String,
}

impl SourceError {
    pub fn new(message: impl Into<String>) -> Self {
        SourceError { message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymbolSetError {
    #[error("symbol list is empty")]
    Empty,
    #[error("duplicate symbol {0}")]
    Duplicate(String),
    #[error("tell index {index} out of range for {len} symbols")]
    TellOutOfRange { index: usize, len: usize },
}

/// Ordered, duplicate-free symbols plus the index of the tell symbol whose
/// volume gates storage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSet {
    symbols: Vec<String>,
    tell: usize,
}

impl SymbolSet {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>, tell: usize) -> Result<Self, SymbolSetError> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(SymbolSetError::Empty);
        }
        let mut seen = HashSet::new();
        for s in &symbols {
            if !seen.insert(s.as_str()) {
                return Err(SymbolSetError::Duplicate(s.clone()));
            }
        }
        if tell >= symbols.len() {
            return Err(SymbolSetError::TellOutOfRange { index: tell, len: symbols.len() });
        }
        Ok(SymbolSet { symbols, tell })
    }

    pub fn single(symbol: impl Into<String>) -> Self {
        SymbolSet { symbols: vec![symbol.into()], tell: 0 }
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn tell_index(&self) -> usize {
        self.tell
    }

    pub fn tell_symbol(&self) -> &str {
        &self.symbols[self.tell]
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn position(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }
}

/// One poll's snapshot: a record for every configured symbol, in symbol
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct QuoteBatch {
    entries: Vec<(String, QuoteRecord)>,
}

impl QuoteBatch {
    /// Builds a batch, failing unless every symbol has exactly one record.
    pub fn from_entries(symbols: &SymbolSet, entries: Vec<(String, QuoteRecord)>) -> Result<Self, SourceError> {
        let mut ordered = Vec::with_capacity(symbols.len());
        for sym in symbols.symbols() {
            let mut matches = entries.iter().filter(|(s, _)| s == sym);
            let Some((_, rec)) = matches.next() else {
                return Err(SourceError::new(format!("no quote for {sym}")));
            };
            if matches.next().is_some() {
                return Err(SourceError::new(format!("duplicate quote for {sym}")));
            }
            ordered.push((sym.clone(), *rec));
        }
        Ok(QuoteBatch { entries: ordered })
    }

    pub fn get(&self, symbol: &str) -> Option<&QuoteRecord> {
        self.entries.iter().find(|(s, _)| s == symbol).map(|(_, r)| r)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &QuoteRecord)> {
        self.entries.iter().map(|(s, r)| (s.as_str(), r))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Anything that can produce a batch of quotes on demand.
pub trait QuoteSource: Send {
    /// Polls every symbol at once; `now` is the caller's clock in epoch
    /// seconds.
    fn poll(&mut self, symbols: &SymbolSet, now: i64) -> Result<QuoteBatch, SourceError>;
}

impl<S: QuoteSource + ?Sized> QuoteSource for Box<S> {
    fn poll(&mut self, symbols: &SymbolSet, now: i64) -> Result<QuoteBatch, SourceError> {
        (**self).poll(symbols, now)
    }
}

/// Polls `source` once.
pub fn poll(source: &mut dyn QuoteSource, symbols: &SymbolSet, now: i64) -> Result<QuoteBatch, SourceError> {
    source.poll(symbols, now)
}
