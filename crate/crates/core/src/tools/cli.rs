//! The `quotecast` command line.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::broker::{Broker, BrokerConfig};
use crate::capture::{run_capture, CaptureLimits, CaptureState, ReconnectingStore};
use crate::clock::{Clock, ShutdownSignal, SystemClock};
use crate::eventlog::StderrLog;
use crate::feed::{HttpSource, QuoteSource, ReplaySource, SymbolSet, SyntheticConfig, SyntheticSource};
use crate::monitor::{
    run_monitor, CallbackRegistry, ChartStyle, ExportSink, MonitorConfig, TcpConnector, TerminalSink, TimeSeries,
    ViewSink,
};
use crate::resp::ClientConnection;
use crate::tools::prune::{prune, RetentionPolicy};

pub const URL_ENV: &str = "QUOTECAST_URL";
const DEFAULT_HOST: &str = "127.0.0.1";
const DEFAULT_PORT: u16 = 6379;
const CONNECT_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Parser)]
#[command(name = "quotecast", about = "Market quote capture and monitoring over a RESP broker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the in-memory broker
    Broker(BrokerArgs),
    /// Poll a quote source and store/publish changed batches
    Capture(CaptureArgs),
    /// Follow live quotes and draw a chart
    Monitor(MonitorArgs),
    /// Remove old points from the per-symbol sorted sets
    Prune(PruneArgs),
    /// Print the version
    Version,
}

#[derive(Debug, Args)]
struct Endpoint {
    /// Broker host [env: QUOTECAST_URL, default 127.0.0.1]
    #[arg(long)]
    host: Option<String>,
    /// Broker port [env: QUOTECAST_URL, default 6379]
    #[arg(long)]
    port: Option<u16>,
}

#[derive(Debug, Args)]
struct BrokerArgs {
    #[arg(long, default_value = DEFAULT_HOST)]
    bind: String,
    #[arg(long, default_value_t = DEFAULT_PORT)]
    port: u16,
    /// Per-connection outbound queue limit before a slow client is dropped
    #[arg(long, default_value_t = 8)]
    max_outbound_mib: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SourceKind {
    Synthetic,
    Replay,
    Http,
}

#[derive(Debug, Args)]
struct CaptureArgs {
    #[command(flatten)]
    endpoint: Endpoint,
    /// Comma-separated symbols
    #[arg(long, value_delimiter = ',', default_value = "ES=F")]
    symbols: Vec<String>,
    /// Index of the symbol whose volume gates storage [default: min(2, count-1)]
    #[arg(long)]
    tell: Option<usize>,
    #[arg(long, value_enum, default_value = "synthetic")]
    source: SourceKind,
    /// CSV file for --source replay
    #[arg(long, required_if_eq("source", "replay"))]
    replay_file: Option<PathBuf>,
    /// Endpoint for --source http
    #[arg(long, required_if_eq("source", "http"))]
    http_url: Option<String>,
    /// Seed for --source synthetic
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    interval_secs: u64,
    #[arg(long, default_value_t = 15)]
    backoff_secs: u64,
    /// Stop after this many polls
    #[arg(long)]
    max_polls: Option<u64>,
}

#[derive(Debug, Args)]
struct MonitorArgs {
    #[command(flatten)]
    endpoint: Endpoint,
    #[arg(long, value_delimiter = ',', default_value = "ES=F")]
    symbols: Vec<String>,
    #[arg(long, default_value_t = crate::monitor::DEFAULT_NDAYS)]
    ndays: usize,
    #[arg(long, default_value_t = crate::monitor::DEFAULT_MINOBS)]
    minobs: usize,
    /// Write the final series to this CSV file on exit
    #[arg(long)]
    export: Option<PathBuf>,
    #[arg(long)]
    no_chart: bool,
    /// Plain ASCII chart instead of line-drawing characters
    #[arg(long)]
    ascii: bool,
    #[arg(long, default_value_t = 72)]
    width: usize,
    #[arg(long, default_value_t = 12)]
    height: usize,
    /// Stop after this many listen iterations
    #[arg(long)]
    max_iterations: Option<u64>,
}

#[derive(Debug, Args)]
struct PruneArgs {
    #[command(flatten)]
    endpoint: Endpoint,
    #[arg(long, value_delimiter = ',', required = true)]
    symbols: Vec<String>,
    /// Age limit in days; 0 disables it
    #[arg(long, default_value_t = 30)]
    max_age_days: u64,
    /// Per-symbol point limit; 0 disables it
    #[arg(long, default_value_t = 200_000)]
    max_points: u64,
    /// Report what would be removed without removing it
    #[arg(long)]
    dry_run: bool,
    /// Reference time in epoch seconds [default: now]
    #[arg(long)]
    now: Option<i64>,
}

/// Resolves the broker address: flags win, then `QUOTECAST_URL`
/// (`redis://host:port` or `host:port`), then the defaults.
pub fn resolve_endpoint(host: Option<&str>, port: Option<u16>, env_url: Option<&str>) -> Result<(String, u16), String> {
    let (mut env_host, mut env_port) = (None, None);
    if let Some(url) = env_url.map(str::trim).filter(|u| !u.is_empty()) {
        let rest = url.strip_prefix("redis://").unwrap_or(url);
        let rest = rest.trim_end_matches('/');
        let (h, p) = match rest.rsplit_once(':') {
            Some((h, p)) => (h, Some(p)),
            None => (rest, None),
        };
        if !h.is_empty() {
            env_host = Some(h.to_owned());
        }
        if let Some(p) = p {
            env_port = Some(p.parse::<u16>().map_err(|_| format!("{URL_ENV}: bad port in {url:?}"))?);
        }
    }
    let host = host.map(str::to_owned).or(env_host).unwrap_or_else(|| DEFAULT_HOST.to_owned());
    Ok((host, port.or(env_port).unwrap_or(DEFAULT_PORT)))
}

impl Endpoint {
    fn resolve(&self) -> Result<(String, u16), String> {
        let env = std::env::var(URL_ENV).ok();
        resolve_endpoint(self.host.as_deref(), self.port, env.as_deref())
    }
}

fn install_shutdown_handler() -> ShutdownSignal {
    let signal = ShutdownSignal::new();
    let s = signal.clone();
    // a handler from an earlier call in the same process stays in place
    let _ = ctrlc::set_handler(move || s.trigger());
    signal
}

/// Parses `argv` (including the program name) and runs the command.
/// Returns the process exit code: 0 on success, 2 on usage errors and 1
/// on runtime errors, which are reported as one line on stderr.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(msg) => {
            eprintln!("quotecast: {msg}");
            1
        }
    }
}

fn run(command: Command) -> Result<(), String> {
    match command {
        Command::Version => {
            println!("quotecast {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
        Command::Broker(a) => run_broker(a),
        Command::Capture(a) => run_capture_cmd(a),
        Command::Monitor(a) => run_monitor_cmd(a),
        Command::Prune(a) => run_prune(a),
    }
}

fn run_broker(a: BrokerArgs) -> Result<(), String> {
    let config = BrokerConfig { max_outbound_bytes: a.max_outbound_mib << 20, ..BrokerConfig::default() };
    let broker = Broker::bind(&a.bind, a.port, config).map_err(|e| format!("cannot bind {}:{}: {e}", a.bind, a.port))?;
    eprintln!("quotecast broker listening on {}", broker.local_addr());
    let shutdown = install_shutdown_handler();
    broker.run(&shutdown).map_err(|e| e.to_string())
}

fn run_capture_cmd(a: CaptureArgs) -> Result<(), String> {
    let (host, port) = a.endpoint.resolve()?;
    let tell = a.tell.unwrap_or(2.min(a.symbols.len().saturating_sub(1)));
    let symbols = SymbolSet::new(a.symbols.iter().cloned(), tell).map_err(|e| e.to_string())?;
    let mut source: Box<dyn QuoteSource> = match a.source {
        SourceKind::Synthetic => Box::new(SyntheticSource::new(a.seed, SyntheticConfig::default())),
        SourceKind::Replay => {
            let path = a.replay_file.expect("required by clap");
            Box::new(ReplaySource::from_path(&path).map_err(|e| e.to_string())?)
        }
        SourceKind::Http => Box::new(HttpSource::disabled(a.http_url.expect("required by clap"))),
    };
    let mut store = ReconnectingStore::new(host, port, CONNECT_TIMEOUT);
    let mut state = CaptureState::with_timing(Duration::from_secs(a.interval_secs), Duration::from_secs(a.backoff_secs));
    let shutdown = install_shutdown_handler();
    let report = run_capture(
        &mut store,
        &mut source,
        &symbols,
        &mut state,
        &SystemClock,
        &mut StderrLog,
        &shutdown,
        CaptureLimits { max_polls: a.max_polls },
    );
    eprintln!(
        "quotecast capture: {} polls, {} batches stored, {} poll errors, {} store errors",
        report.polls, report.stored_batches, report.poll_failures, report.store_failures
    );
    Ok(())
}

/// Used when neither a chart nor an export is wanted.
struct NullSink;

impl ViewSink for NullSink {
    fn emit(&mut self, _: &[TimeSeries]) -> std::io::Result<()> {
        Ok(())
    }
}

fn run_monitor_cmd(a: MonitorArgs) -> Result<(), String> {
    let (host, port) = a.endpoint.resolve()?;
    if a.width == 0 || a.height == 0 {
        return Err("chart width and height must be positive".into());
    }
    let chart: Option<Box<dyn ViewSink>> = (!a.no_chart).then(|| {
        let style = if a.ascii { ChartStyle::Ascii } else { ChartStyle::Unicode };
        let mut t = TerminalSink::stdout(style);
        (t.width, t.height) = (a.width, a.height);
        Box::new(t) as Box<dyn ViewSink>
    });
    let mut sink: Box<dyn ViewSink> = match (a.export, chart) {
        (Some(path), inner) => Box::new(ExportSink::new(path, inner)),
        (None, Some(chart)) => chart,
        (None, None) => Box::new(NullSink),
    };
    let config = MonitorConfig { ndays: a.ndays, minobs: a.minobs, max_iterations: a.max_iterations, ..MonitorConfig::default() };
    let registry = CallbackRegistry::for_symbols(&a.symbols);
    let mut connector = TcpConnector { host, port, timeout: CONNECT_TIMEOUT };
    let shutdown = install_shutdown_handler();
    run_monitor(
        &mut connector,
        &a.symbols,
        &registry,
        &config,
        sink.as_mut(),
        &SystemClock,
        &mut StderrLog,
        &shutdown,
    )
    .map(|_| ())
    .map_err(|e| e.to_string())
}

fn run_prune(a: PruneArgs) -> Result<(), String> {
    let (host, port) = a.endpoint.resolve()?;
    let max_age = (a.max_age_days > 0).then(|| RetentionPolicy::days(a.max_age_days));
    let policy = RetentionPolicy::new(max_age, a.max_points).map_err(|e| e.to_string())?;
    let mut conn = ClientConnection::connect(&host, port, CONNECT_TIMEOUT).map_err(|e| e.to_string())?;
    let now = a.now.unwrap_or_else(|| SystemClock.now_secs());
    let verb = if a.dry_run { "would remove" } else { "removed" };
    let mut failed = Vec::new();
    for outcome in prune(&mut conn, &a.symbols, &policy, now, a.dry_run) {
        match outcome.result {
            Ok(p) => println!(
                "{}: {verb} {} (age {}, count {}), {} remaining",
                outcome.symbol,
                p.removed(),
                p.by_age,
                p.by_count,
                p.remaining
            ),
            Err(e) => {
                println!("{}: failed: {e}", outcome.symbol);
                failed.push(outcome.symbol);
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(format!("prune failed for {}", failed.join(", ")))
    }
}
