//! HTTP quote source seam.
//!
//! No vendor is wired in. The source is disabled unless a transport is
//! supplied; the transport performs the GET and returns the body, which
//! must have this shape:
//!
//! ```json
//! {"quotes": [{"symbol": "ES=F", "time": 1647381600, "close": 4261.75,
//!              "change": -0.25, "pct_change": -0.0059, "volume": 1200000}]}
//! ```

use serde::Deserialize;

use super::record::{QuoteBatch, QuoteRecord, QuoteSource, SourceError, SymbolSet};

#[derive(Debug, Deserialize)]
struct Body {
    quotes: Vec<Quote>,
}

#[derive(Debug, Deserialize)]
struct Quote {
    symbol: String,
    time: i64,
    close: f64,
    change: f64,
    pct_change: f64,
    volume: f64,
}

pub type Transport = Box<dyn FnMut(&str) -> Result<String, String> + Send>;

pub struct HttpSource {
    url: String,
    transport: Option<Transport>,
}

impl HttpSource {
    /// A source that fails every poll until a transport is attached.
    pub fn disabled(url: impl Into<String>) -> Self {
        HttpSource { url: url.into(), transport: None }
    }

    pub fn with_transport(url: impl Into<String>, transport: Transport) -> Self {
        HttpSource { url: url.into(), transport: Some(transport) }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

/// Parses a response body into a batch for `symbols`.
pub fn parse_body(body: &str, symbols: &SymbolSet) -> Result<QuoteBatch, SourceError> {
    let body: Body = serde_json::from_str(body).map_err(|e| SourceError::new(format!("malformed quote body: {e}")))?;
    let entries = body
        .quotes
        .into_iter()
        .filter(|q| symbols.position(&q.symbol).is_some())
        .map(|q| {
            let rec = QuoteRecord::new(q.time, q.close, q.change, q.pct_change, q.volume);
            rec.validate().map(|_| (q.symbol, rec))
        })
        .collect::<Result<Vec<_>, _>>()?;
    QuoteBatch::from_entries(symbols, entries)
}

impl QuoteSource for HttpSource {
    fn poll(&mut self, symbols: &SymbolSet, _now: i64) -> Result<QuoteBatch, SourceError> {
        let Some(transport) = self.transport.as_mut() else {
            return Err(SourceError::new(format!("http source for {} is disabled", self.url)));
        };
        let body = transport(&self.url).map_err(SourceError::new)?;
        parse_body(&body, symbols)
    }
}
