//! Monitor: bootstraps per-symbol history from the broker, follows the
//! live channels and keeps deduplicated series for display and export.

mod dispatch;
mod render;
mod run;
mod series;
mod window;

pub use dispatch::{get_all_data, monitor_channels, CallbackRegistry, DispatchResult, PayloadDecoder, SeriesRead};
pub use render::{export_csv, render, ChartStyle, ExportSink, SnapshotSink, TerminalSink, ViewSink};
pub use run::{run_monitor, Connector, MonitorConfig, MonitorError, MonitorReport, TcpConnector};
pub use series::TimeSeries;
pub use window::{most_recent_n_days, DEFAULT_MINOBS, DEFAULT_NDAYS};
