//! Text charts, CSV export and the view sinks the monitor loop drives.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::DateTime;

use super::series::TimeSeries;
use crate::feed::{canonical_float, write_symbol_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChartStyle {
    #[default]
    Unicode,
    Ascii,
}

struct Glyphs {
    mark: char,
    tick: char,
    axis: char,
    corner: char,
    rule: char,
}

impl ChartStyle {
    fn glyphs(self) -> Glyphs {
        match self {
            ChartStyle::Unicode => Glyphs { mark: '•', tick: '┤', axis: '│', corner: '└', rule: '─' },
            ChartStyle::Ascii => Glyphs { mark: '*', tick: '+', axis: '|', corner: '+', rule: '-' },
        }
    }
}

fn utc_minute(t: i64) -> String {
    DateTime::from_timestamp(t, 0).map_or_else(|| t.to_string(), |d| d.format("%Y-%m-%d %H:%M").to_string())
}

/// Renders one panel per series: a header with the last close and change,
/// then a `width` × `height` close-price chart. Points are bucketed into
/// at most `width` columns, each plotting its bucket's last close.
/// Zero dimensions are treated as 1.
pub fn render(series: &[TimeSeries], width: usize, height: usize, style: ChartStyle) -> String {
    let mut out = String::new();
    for (i, s) in series.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        render_panel(&mut out, s, width.max(1), height.max(1), &style.glyphs());
    }
    out
}

fn render_panel(out: &mut String, s: &TimeSeries, width: usize, height: usize, g: &Glyphs) {
    let Some(last) = s.last() else {
        out.push_str(&format!("{}  no data\n", s.symbol));
        return;
    };
    out.push_str(&format!(
        "{}  last {}  chg {} ({}%)  points {}\n",
        s.symbol,
        canonical_float(last.close),
        canonical_float(last.change),
        canonical_float(last.pct_change),
        s.len()
    ));

    let pts = s.points();
    let cols = width.min(pts.len());
    let values: Vec<f64> = (0..cols).map(|j| pts[(j + 1) * pts.len() / cols - 1].close).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let levels: Vec<usize> = values
        .iter()
        .map(|&v| {
            if hi > lo {
                (((v - lo) / (hi - lo)) * (height - 1) as f64).round() as usize
            } else {
                (height - 1) / 2
            }
        })
        .collect();

    let hi_label = canonical_float(hi);
    let lo_label = canonical_float(lo);
    let label_width = hi_label.chars().count().max(lo_label.chars().count());
    for row in 0..height {
        let level = height - 1 - row;
        let (label, edge) = match row {
            0 => (hi_label.as_str(), g.tick),
            _ if row == height - 1 => (lo_label.as_str(), g.tick),
            _ => ("", g.axis),
        };
        let cells: String = levels.iter().map(|&l| if l == level { g.mark } else { ' ' }).collect();
        out.push_str(&format!("{label:>label_width$} {edge}{}\n", cells.trim_end()));
    }
    let rule: String = std::iter::repeat_n(g.rule, cols).collect();
    out.push_str(&format!("{:label_width$} {}{rule}\n", "", g.corner));
    out.push_str(&format!(
        "{:label_width$}  {} .. {} UTC\n",
        "",
        utc_minute(pts[0].time),
        utc_minute(last.time)
    ));
}

/// Writes `symbol,time,close,change,pct_change,volume` rows for every
/// point of every series.
pub fn export_csv(series: &[TimeSeries], path: impl AsRef<Path>) -> io::Result<()> {
    let file = BufWriter::new(File::create(path)?);
    let rows = series.iter().flat_map(|s| s.points().iter().map(move |p| (s.symbol.as_str(), p)));
    write_symbol_csv(file, rows)?;
    Ok(())
}

/// Receives the monitor's current series after each refresh.
pub trait ViewSink: Send {
    fn emit(&mut self, series: &[TimeSeries]) -> io::Result<()>;

    /// Called once when the loop exits.
    fn finish(&mut self, series: &[TimeSeries]) -> io::Result<()> {
        self.emit(series)
    }
}

/// Redraws the chart on a terminal (or any writer).
pub struct TerminalSink {
    out: Box<dyn Write + Send>,
    pub width: usize,
    pub height: usize,
    pub style: ChartStyle,
    /// Clear the screen before each frame.
    pub clear: bool,
}

impl TerminalSink {
    pub fn stdout(style: ChartStyle) -> Self {
        TerminalSink { out: Box::new(io::stdout()), width: 72, height: 12, style, clear: true }
    }

    pub fn to_writer(out: Box<dyn Write + Send>, width: usize, height: usize, style: ChartStyle) -> Self {
        TerminalSink { out, width, height, style, clear: false }
    }
}

impl ViewSink for TerminalSink {
    fn emit(&mut self, series: &[TimeSeries]) -> io::Result<()> {
        if self.clear {
            self.out.write_all(b"\x1b[2J\x1b[H")?;
        }
        self.out.write_all(render(series, self.width, self.height, self.style).as_bytes())?;
        self.out.flush()
    }
}

/// Writes the CSV export when the loop finishes, then forwards to an
/// optional inner sink.
pub struct ExportSink {
    path: PathBuf,
    inner: Option<Box<dyn ViewSink>>,
}

impl ExportSink {
    pub fn new(path: impl Into<PathBuf>, inner: Option<Box<dyn ViewSink>>) -> Self {
        ExportSink { path: path.into(), inner }
    }
}

impl ViewSink for ExportSink {
    fn emit(&mut self, series: &[TimeSeries]) -> io::Result<()> {
        self.inner.as_mut().map_or(Ok(()), |s| s.emit(series))
    }

    fn finish(&mut self, series: &[TimeSeries]) -> io::Result<()> {
        export_csv(series, &self.path)?;
        self.inner.as_mut().map_or(Ok(()), |s| s.finish(series))
    }
}

/// Keeps the latest emitted view in shared memory.
#[derive(Clone, Default)]
pub struct SnapshotSink {
    latest: Arc<Mutex<Vec<TimeSeries>>>,
    emits: Arc<Mutex<usize>>,
}

impl SnapshotSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn latest(&self) -> Vec<TimeSeries> {
        self.latest.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn emits(&self) -> usize {
        *self.emits.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl ViewSink for SnapshotSink {
    fn emit(&mut self, series: &[TimeSeries]) -> io::Result<()> {
        *self.latest.lock().unwrap_or_else(|e| e.into_inner()) = series.to_vec();
        *self.emits.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        Ok(())
    }
}
