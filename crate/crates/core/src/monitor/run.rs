use std::io;
use std::time::Duration;

use thiserror::Error;

use super::dispatch::{get_all_data, monitor_channels, CallbackRegistry, DispatchResult};
use super::render::ViewSink;
use super::series::TimeSeries;
use super::window::{most_recent_n_days, DEFAULT_MINOBS, DEFAULT_NDAYS};
use crate::clock::{Clock, ShutdownSignal};
use crate::eventlog::{format_line, LogSink};
use crate::resp::{ClientConnection, ClientError};

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("cannot reach broker: {0}")]
    Connect(ClientError),
    #[error("view output failed: {0}")]
    View(#[from] io::Error),
}

/// Opens fresh broker connections for the monitor.
pub trait Connector: Send {
    fn connect(&mut self) -> Result<ClientConnection, ClientError>;
}

pub struct TcpConnector {
    pub host: String,
    pub port: u16,
    pub timeout: Duration,
}

impl Connector for TcpConnector {
    fn connect(&mut self) -> Result<ClientConnection, ClientError> {
        ClientConnection::connect(&self.host, self.port, self.timeout)
    }
}

#[derive(Debug, Clone)]
pub struct MonitorConfig {
    pub ndays: usize,
    pub minobs: usize,
    pub listen_timeout: Duration,
    /// Views are emitted at most this often (by the injected clock).
    pub min_redraw: Duration,
    pub reconnect_initial: Duration,
    pub reconnect_max: Duration,
    pub max_iterations: Option<u64>,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            ndays: DEFAULT_NDAYS,
            minobs: DEFAULT_MINOBS,
            listen_timeout: Duration::from_secs(1),
            min_redraw: Duration::from_secs(1),
            reconnect_initial: Duration::from_secs(1),
            reconnect_max: Duration::from_secs(60),
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MonitorReport {
    pub iterations: u64,
    pub decoded: u64,
    /// Live points dropped because their timestamp was already present.
    pub duplicates: u64,
    pub raw: u64,
    pub malformed: u64,
    pub timeouts: u64,
    pub reconnects: u64,
    pub emits: u64,
}

struct Session {
    sub: ClientConnection,
    series: Vec<TimeSeries>,
}

/// Subscribes first, then reads history on a second connection, so any
/// point stored after the read is also delivered live.
fn open_session(
    connector: &mut dyn Connector,
    symbols: &[String],
    config: &MonitorConfig,
    say: &mut dyn FnMut(String),
) -> Result<Session, ClientError> {
    let mut sub = connector.connect()?;
    sub.subscribe(symbols)?;
    let mut query = connector.connect()?;
    let mut series = Vec::with_capacity(symbols.len());
    for sym in symbols {
        let read = get_all_data(&mut query, sym)?;
        if read.malformed > 0 {
            say(format!("{sym}: skipped {} malformed stored members", read.malformed));
        }
        series.push(most_recent_n_days(&read.series, config.ndays, config.minobs));
    }
    Ok(Session { sub, series })
}

/// Runs the subscriber loop until `shutdown` fires or the iteration limit
/// is reached, and returns the final series (in `symbols` order).
///
/// A lost connection is retried with exponential backoff and a full
/// bootstrap; only the initial connection failure is returned as an error.
#[allow(clippy::too_many_arguments)]
pub fn run_monitor(
    connector: &mut dyn Connector,
    symbols: &[String],
    registry: &CallbackRegistry,
    config: &MonitorConfig,
    sink: &mut dyn ViewSink,
    clock: &dyn Clock,
    log: &mut dyn LogSink,
    shutdown: &ShutdownSignal,
) -> Result<(Vec<TimeSeries>, MonitorReport), MonitorError> {
    let mut report = MonitorReport::default();
    let mut say = |msg: String| log.line(&format_line(clock.now_millis(), &msg));

    let Session { mut sub, mut series } =
        open_session(connector, symbols, config, &mut say).map_err(MonitorError::Connect)?;
    sink.emit(&series)?;
    report.emits += 1;
    let mut last_emit = clock.now_millis();
    let mut dirty = false;

    'outer: while !shutdown.is_triggered() && config.max_iterations.is_none_or(|max| report.iterations < max) {
        report.iterations += 1;
        match monitor_channels(&mut sub, registry, config.listen_timeout) {
            Ok(DispatchResult::Decoded { symbol, points }) => {
                report.decoded += 1;
                match symbols.iter().position(|s| *s == symbol) {
                    Some(i) => {
                        let offered = points.len();
                        let added = series[i].append_dedup(points);
                        report.duplicates += (offered - added) as u64;
                        dirty |= added > 0;
                    }
                    None => say(format!("decoded data for unmonitored channel {symbol}")),
                }
            }
            Ok(DispatchResult::Raw { message, error }) => {
                report.raw += 1;
                let body = String::from_utf8_lossy(&message.payload);
                match error {
                    Some(e) => {
                        report.malformed += 1;
                        say(format!("malformed payload on {}: {e}: {body:?}", message.channel));
                    }
                    None => say(format!("{} {} {body}", message.kind, message.channel)),
                }
            }
            Ok(DispatchResult::Timeout) => {
                report.timeouts += 1;
                dirty = true;
            }
            Err(e) => {
                say(format!("connection lost: {e}"));
                let mut backoff = config.reconnect_initial;
                loop {
                    clock.sleep(backoff, shutdown);
                    if shutdown.is_triggered() {
                        break 'outer;
                    }
                    match open_session(connector, symbols, config, &mut say) {
                        Ok(session) => {
                            sub = session.sub;
                            series = session.series;
                            report.reconnects += 1;
                            dirty = true;
                            say("...reconnected".to_string());
                            break;
                        }
                        Err(e) => {
                            say(format!("reconnect failed: {e}"));
                            backoff = (backoff * 2).min(config.reconnect_max);
                        }
                    }
                }
            }
        }

        let now = clock.now_millis();
        if dirty && now - last_emit >= config.min_redraw.as_millis() as i64 {
            sink.emit(&series)?;
            report.emits += 1;
            last_emit = now;
            dirty = false;
        }
    }
    sink.finish(&series)?;
    report.emits += 1;
    Ok((series, report))
}
