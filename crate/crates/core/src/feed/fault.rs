use std::collections::BTreeSet;

use super::record::{QuoteBatch, QuoteSource, SourceError, SymbolSet};

/// Wraps a source and fails chosen polls.
///
/// Poll numbers are 1-based and count every call, failed or not. A failed
/// poll does not consume anything from the inner source.
pub struct FaultInjectingSource<S> {
    inner: S,
    polls: u64,
    fail_on: BTreeSet<u64>,
    armed: Option<String>,
    message: String,
}

impl<S: QuoteSource> FaultInjectingSource<S> {
    pub fn new(inner: S) -> Self {
        FaultInjectingSource {
            inner,
            polls: 0,
            fail_on: BTreeSet::new(),
            armed: None,
            message: "injected source failure".into(),
        }
    }

    pub fn fail_polls(mut self, polls: impl IntoIterator<Item = u64>) -> Self {
        self.fail_on.extend(polls);
        self
    }

    pub fn with_message(mut self, message: impl Into<String>) -> Self {
        self.message = message.into();
        self
    }

    /// Makes the next poll fail with `message`.
    pub fn arm(&mut self, message: impl Into<String>) {
        self.armed = Some(message.into());
    }

    pub fn polls(&self) -> u64 {
        self.polls
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }
}

impl<S: QuoteSource> QuoteSource for FaultInjectingSource<S> {
    fn poll(&mut self, symbols: &SymbolSet, now: i64) -> Result<QuoteBatch, SourceError> {
        self.polls += 1;
        if let Some(msg) = self.armed.take() {
            return Err(SourceError::new(msg));
        }
        if self.fail_on.contains(&self.polls) {
            return Err(SourceError::new(format!("{} (poll {})", self.message, self.polls)));
        }
        self.inner.poll(symbols, now)
    }
}
