#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::Duration;

use quotecast::broker::{Broker, BrokerConfig, BrokerHandle};
use quotecast::resp::{encode_command, ClientConnection};
use serde::Deserialize;

pub fn start_broker() -> BrokerHandle {
    Broker::bind("127.0.0.1", 0, BrokerConfig::default())
        .expect("bind broker")
        .spawn()
}

pub fn client(broker: &BrokerHandle) -> ClientConnection {
    ClientConnection::connect("127.0.0.1", broker.port(), Duration::from_secs(5)).expect("connect")
}

#[derive(Debug, Deserialize)]
pub struct ReferenceScript {
    pub server: String,
    pub connections: usize,
    pub steps: Vec<ReferenceStep>,
}

#[derive(Debug, Deserialize)]
pub struct ReferenceStep {
    pub conn: usize,
    pub cmd: Vec<String>,
    pub replies: std::collections::BTreeMap<String, String>,
}

pub fn load_reference() -> ReferenceScript {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/broker_reference.json");
    let text = std::fs::read_to_string(path).expect("read fixture");
    serde_json::from_str(&text).expect("parse fixture")
}

/// Replays the recorded script against a fresh broker and returns the
/// first mismatch, if any, as (step index, description).
pub fn replay_reference(script: &ReferenceScript) -> Result<usize, (usize, String)> {
    let broker = start_broker();
    let mut socks: Vec<TcpStream> = (0..script.connections)
        .map(|_| {
            let s = TcpStream::connect(broker.addr()).expect("raw connect");
            s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
            s
        })
        .collect();
    for (i, step) in script.steps.iter().enumerate() {
        socks[step.conn]
            .write_all(&encode_command(&step.cmd))
            .map_err(|e| (i, e.to_string()))?;
        for (conn, expected) in &step.replies {
            let conn: usize = conn.parse().unwrap();
            let mut got = vec![0u8; expected.len()];
            socks[conn]
                .read_exact(&mut got)
                .map_err(|e| (i, format!("conn {conn}: {e} waiting for {expected:?}")))?;
            if got != expected.as_bytes() {
                return Err((
                    i,
                    format!(
                        "conn {conn} cmd {:?}: expected {expected:?}, got {:?}",
                        step.cmd,
                        String::from_utf8_lossy(&got)
                    ),
                ));
            }
        }
    }
    // nothing beyond the recorded bytes may arrive
    for (conn, sock) in socks.iter_mut().enumerate() {
        sock.set_read_timeout(Some(Duration::from_millis(100))).unwrap();
        let mut extra = [0u8; 256];
        if let Ok(n) = sock.read(&mut extra) {
            if n > 0 {
                return Err((
                    script.steps.len(),
                    format!("conn {conn}: unexpected trailing {:?}", String::from_utf8_lossy(&extra[..n])),
                ));
            }
        }
    }
    Ok(script.steps.len())
}

// ---- end-to-end pipeline -------------------------------------------------

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use quotecast::capture::{run_capture, CaptureLimits, CaptureReport, CaptureState};
use quotecast::clock::{ShutdownSignal, VirtualClock};
use quotecast::eventlog::MemoryLog;
use quotecast::feed::{QuoteBatch, QuoteSource, SourceError, SymbolSet, SyntheticConfig, SyntheticSource};
use quotecast::monitor::{
    get_all_data, run_monitor, CallbackRegistry, MonitorConfig, MonitorReport, SnapshotSink, TcpConnector,
    TimeSeries,
};

pub const START: i64 = 1_647_381_600;

/// Counts polls so a test can act partway through a capture run.
pub struct Counted<S> {
    pub inner: S,
    pub polls: Arc<AtomicU64>,
}

impl<S: QuoteSource> QuoteSource for Counted<S> {
    fn poll(&mut self, symbols: &SymbolSet, now: i64) -> Result<QuoteBatch, SourceError> {
        self.polls.fetch_add(1, Ordering::SeqCst);
        self.inner.poll(symbols, now)
    }
}

pub fn fast_monitor_config() -> MonitorConfig {
    MonitorConfig {
        listen_timeout: Duration::from_millis(20),
        min_redraw: Duration::ZERO,
        ..MonitorConfig::default()
    }
}

pub fn wait_until(deadline: Duration, mut cond: impl FnMut() -> bool) -> bool {
    let end = Instant::now() + deadline;
    while Instant::now() < end {
        if cond() {
            return true;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    cond()
}

/// Handle on a monitor running in its own thread.
pub struct RunningMonitor {
    pub sink: SnapshotSink,
    stop: ShutdownSignal,
    thread: std::thread::JoinHandle<(Vec<TimeSeries>, MonitorReport)>,
}

impl RunningMonitor {
    pub fn start(port: u16, symbols: &[String]) -> Self {
        let sink = SnapshotSink::new();
        let stop = ShutdownSignal::new();
        let (mut sink2, stop2, syms) = (sink.clone(), stop.clone(), symbols.to_vec());
        let thread = std::thread::spawn(move || {
            let mut conn = TcpConnector { host: "127.0.0.1".into(), port, timeout: Duration::from_secs(5) };
            run_monitor(
                &mut conn,
                &syms,
                &CallbackRegistry::for_symbols(&syms),
                &fast_monitor_config(),
                &mut sink2,
                &VirtualClock::starting_at(START),
                &mut MemoryLog::new(),
                &stop2,
            )
            .expect("monitor run")
        });
        let running = RunningMonitor { sink, stop, thread };
        assert!(wait_until(Duration::from_secs(10), || running.sink.emits() > 0), "monitor never bootstrapped");
        running
    }

    /// Waits until the latest view equals `expected`.
    pub fn converge(&self, expected: &[TimeSeries]) -> bool {
        wait_until(Duration::from_secs(20), || self.sink.latest() == expected)
    }

    pub fn stop(self) -> (Vec<TimeSeries>, MonitorReport) {
        self.stop.trigger();
        self.thread.join().expect("monitor thread")
    }
}

/// Decodes every stored member per symbol.
pub fn stored_series(broker: &BrokerHandle, symbols: &[String]) -> Vec<TimeSeries> {
    let mut conn = client(broker);
    symbols
        .iter()
        .map(|s| {
            let read = get_all_data(&mut conn, s).expect("read stored");
            assert_eq!(read.malformed, 0);
            read.series
        })
        .collect()
}

pub struct PipelineRun {
    pub symbols: Vec<String>,
    pub monitor: RunningMonitor,
    pub capture: CaptureReport,
    pub clock: VirtualClock,
}

/// Runs a seeded synthetic capture for `polls` virtual polls against
/// `broker`. The monitor is started once `monitor_after` polls have been
/// made, while capture keeps running in another thread.
pub fn run_pipeline(broker: &BrokerHandle, seed: u64, symbols: &[&str], polls: u64, monitor_after: u64) -> PipelineRun {
    let symbols: Vec<String> = symbols.iter().map(|s| s.to_string()).collect();
    let set = SymbolSet::new(symbols.iter().cloned(), 2.min(symbols.len() - 1)).unwrap();
    let counter = Arc::new(AtomicU64::new(0));
    let mut source = Counted {
        inner: SyntheticSource::new(seed, SyntheticConfig { p_trade: 0.9, ..SyntheticConfig::default() }),
        polls: counter.clone(),
    };
    let clock = VirtualClock::starting_at(START);
    let clock2 = clock.clone();
    let mut writer = client(broker);
    let capture = std::thread::spawn(move || {
        run_capture(
            &mut writer,
            &mut source,
            &set,
            &mut CaptureState::default(),
            &clock2,
            &mut MemoryLog::new(),
            &ShutdownSignal::new(),
            CaptureLimits { max_polls: Some(polls) },
        )
    });
    assert!(wait_until(Duration::from_secs(20), || counter.load(Ordering::SeqCst) >= monitor_after));
    let monitor = RunningMonitor::start(broker.port(), &symbols);
    let capture = capture.join().expect("capture thread");
    PipelineRun { symbols, monitor, capture, clock }
}
