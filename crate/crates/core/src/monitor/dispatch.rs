use std::collections::HashMap;
use std::time::Duration;

use super::series::TimeSeries;
use crate::capture::{decode_payload_bytes, PayloadError};
use crate::feed::QuoteRecord;
use crate::resp::{ChannelMessage, ClientConnection, ClientError, RespValue};

pub type PayloadDecoder = Box<dyn Fn(&[u8]) -> Result<Vec<QuoteRecord>, PayloadError> + Send>;

/// Channel name → payload decoder. Lookups are exact.
#[derive(Default)]
pub struct CallbackRegistry {
    decoders: HashMap<String, PayloadDecoder>,
}

impl CallbackRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// A registry with the standard payload decoder on every symbol.
    pub fn for_symbols<S: AsRef<str>>(symbols: &[S]) -> Self {
        let mut reg = Self::new();
        for s in symbols {
            reg.register(s.as_ref(), Box::new(|bytes| decode_payload_bytes(bytes).map(|r| vec![r])));
        }
        reg
    }

    pub fn register(&mut self, channel: impl Into<String>, decoder: PayloadDecoder) {
        self.decoders.insert(channel.into(), decoder);
    }

    pub fn get(&self, channel: &str) -> Option<&PayloadDecoder> {
        self.decoders.get(channel)
    }

    pub fn channels(&self) -> impl Iterator<Item = &str> {
        self.decoders.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DispatchResult {
    Decoded { symbol: String, points: Vec<QuoteRecord> },
    /// Anything that is not a decodable message on a registered channel;
    /// `error` is set when the decoder rejected the payload.
    Raw { message: ChannelMessage, error: Option<String> },
    Timeout,
}

/// Listens once and routes the push through `registry`.
pub fn monitor_channels(
    conn: &mut ClientConnection,
    registry: &CallbackRegistry,
    timeout: Duration,
) -> Result<DispatchResult, ClientError> {
    let Some(message) = conn.listen(timeout)? else {
        return Ok(DispatchResult::Timeout);
    };
    Ok(route(message, registry))
}

pub(crate) fn route(message: ChannelMessage, registry: &CallbackRegistry) -> DispatchResult {
    if message.kind != "message" {
        return DispatchResult::Raw { message, error: None };
    }
    let Some(decoder) = registry.get(&message.channel) else {
        return DispatchResult::Raw { message, error: None };
    };
    match decoder(&message.payload) {
        Ok(points) => DispatchResult::Decoded { symbol: message.channel, points },
        Err(e) => DispatchResult::Raw { message, error: Some(e.to_string()) },
    }
}

/// A full-range read of one symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRead {
    pub series: TimeSeries,
    /// Members that failed to decode and were skipped.
    pub malformed: usize,
}

/// Reads every member of `symbol`'s sorted set into a deduplicated series.
pub fn get_all_data(conn: &mut ClientConnection, symbol: &str) -> Result<SeriesRead, ClientError> {
    let members = match conn.command(&["ZRANGE", symbol, "0", "-1"])? {
        RespValue::Array(items) => items,
        RespValue::Error(e) => return Err(ClientError::Server(e)),
        other => return Err(ClientError::Protocol(format!("unexpected ZRANGE reply: {other:?}"))),
    };
    let mut malformed = 0;
    let mut points = Vec::with_capacity(members.len());
    for m in &members {
        match m.as_bytes().map(decode_payload_bytes) {
            Some(Ok(p)) => points.push(p),
            _ => malformed += 1,
        }
    }
    Ok(SeriesRead { series: TimeSeries::from_points(symbol, points), malformed })
}
