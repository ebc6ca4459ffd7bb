//! The store-and-publish loop.
//!
//! Each iteration polls the source once. A failed poll logs, sets the
//! error flag and sleeps the backoff. A successful batch is stored and
//! published only when the tell symbol's cumulative volume differs from
//! the previous poll's, then the loop sleeps the poll interval.

use std::time::Duration;

use thiserror::Error;

use super::payload::encode_payload;
use crate::clock::{Clock, ShutdownSignal};
use crate::eventlog::{format_line, LogSink};
use crate::feed::{QuoteRecord, QuoteSource, SymbolSet};
use crate::resp::{ClientConnection, ClientError, RespValue};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("{command} rejected: {message}")]
    Rejected { command: &'static str, message: String },
}

/// Destination for captured records.
pub trait QuoteStore {
    fn store_and_publish(&mut self, symbol: &str, record: &QuoteRecord) -> Result<(), StoreError>;
}

/// `ZADD symbol time payload` followed by `PUBLISH symbol payload`; the
/// stored member and the published message are the same bytes.
pub fn store_and_publish(conn: &mut ClientConnection, symbol: &str, record: &QuoteRecord) -> Result<(), StoreError> {
    let payload = encode_payload(record);
    let score = record.time.to_string();
    let reply = conn.command(&[b"ZADD".as_slice(), symbol.as_bytes(), score.as_bytes(), payload.as_bytes()])?;
    check_reply("ZADD", reply)?;
    let reply = conn.command(&[b"PUBLISH".as_slice(), symbol.as_bytes(), payload.as_bytes()])?;
    check_reply("PUBLISH", reply)?;
    Ok(())
}

fn check_reply(command: &'static str, reply: RespValue) -> Result<(), StoreError> {
    match reply {
        RespValue::Integer(_) => Ok(()),
        RespValue::Error(message) => Err(StoreError::Rejected { command, message }),
        other => Err(StoreError::Rejected { command, message: format!("unexpected reply {other:?}") }),
    }
}

impl QuoteStore for ClientConnection {
    fn store_and_publish(&mut self, symbol: &str, record: &QuoteRecord) -> Result<(), StoreError> {
        store_and_publish(self, symbol, record)
    }
}

/// A store that opens its connection lazily and drops it after any
/// failure, so the next attempt reconnects.
pub struct ReconnectingStore {
    host: String,
    port: u16,
    timeout: Duration,
    conn: Option<ClientConnection>,
}

impl ReconnectingStore {
    pub fn new(host: impl Into<String>, port: u16, timeout: Duration) -> Self {
        ReconnectingStore { host: host.into(), port, timeout, conn: None }
    }
}

impl QuoteStore for ReconnectingStore {
    fn store_and_publish(&mut self, symbol: &str, record: &QuoteRecord) -> Result<(), StoreError> {
        if self.conn.is_none() {
            self.conn = Some(ClientConnection::connect(&self.host, self.port, self.timeout)?);
        }
        let conn = self.conn.as_mut().expect("connected above");
        let result = store_and_publish(conn, symbol, record);
        if matches!(result, Err(StoreError::Client(_))) {
            self.conn = None;
        }
        result
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureState {
    /// Tell volume seen on the previous successful poll; unset compares
    /// unequal to everything, so the first batch is always stored.
    pub prev_volume: Option<f64>,
    pub errored: bool,
    pub poll_interval: Duration,
    pub backoff: Duration,
}

impl Default for CaptureState {
    fn default() -> Self {
        CaptureState {
            prev_volume: None,
            errored: false,
            poll_interval: Duration::from_secs(10),
            backoff: Duration::from_secs(15),
        }
    }
}

impl CaptureState {
    pub fn with_timing(poll_interval: Duration, backoff: Duration) -> Self {
        CaptureState { poll_interval, backoff, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CaptureReport {
    pub polls: u64,
    pub stored_batches: u64,
    pub skipped_batches: u64,
    pub poll_failures: u64,
    pub store_failures: u64,
    pub recoveries: u64,
}

/// Loop limits beyond the shutdown signal.
#[derive(Debug, Clone, Copy, Default)]
pub struct CaptureLimits {
    /// Stop after this many polls (failed polls count).
    pub max_polls: Option<u64>,
}

/// Runs until `shutdown` fires or `limits` are reached. Poll and store
/// errors never end the loop; they go through the backoff path.
#[allow(clippy::too_many_arguments)]
pub fn run_capture(
    store: &mut dyn QuoteStore,
    source: &mut dyn QuoteSource,
    symbols: &SymbolSet,
    state: &mut CaptureState,
    clock: &dyn Clock,
    log: &mut dyn LogSink,
    shutdown: &ShutdownSignal,
    limits: CaptureLimits,
) -> CaptureReport {
    let mut report = CaptureReport::default();
    let mut say = |clock: &dyn Clock, msg: String| log.line(&format_line(clock.now_millis(), &msg));

    while !shutdown.is_triggered() && limits.max_polls.is_none_or(|max| report.polls < max) {
        report.polls += 1;
        let batch = match source.poll(symbols, clock.now_secs()) {
            Ok(batch) => batch,
            Err(e) => {
                say(clock, format!("Error: {e}"));
                state.errored = true;
                report.poll_failures += 1;
                clock.sleep(state.backoff, shutdown);
                continue;
            }
        };
        if state.errored {
            state.errored = false;
            report.recoveries += 1;
            say(clock, "...recovered".to_string());
        }

        let tell = batch
            .get(symbols.tell_symbol())
            .expect("batches carry every configured symbol")
            .volume;
        if state.prev_volume != Some(tell) {
            let stored = batch
                .iter()
                .try_for_each(|(sym, rec)| store.store_and_publish(sym, rec));
            if let Err(e) = stored {
                // prev_volume stays put so the next poll retries the store
                say(clock, format!("Error storing batch: {e}"));
                state.errored = true;
                report.store_failures += 1;
                clock.sleep(state.backoff, shutdown);
                continue;
            }
            report.stored_batches += 1;
            say(clock, format!("Storing {} symbols, {} volume {}", batch.len(), symbols.tell_symbol(), tell));
        } else {
            report.skipped_batches += 1;
        }
        state.prev_volume = Some(tell);
        clock.sleep(state.poll_interval, shutdown);
    }
    report
}
