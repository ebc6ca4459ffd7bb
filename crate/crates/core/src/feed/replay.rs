//! CSV replay: `time,close,change,pct_change,volume`, optionally with a
//! `symbol` column for multi-symbol files.

use std::collections::{HashMap, VecDeque};
use std::io::{Read, Write};
use std::path::Path;

use super::record::{canonical_float, QuoteBatch, QuoteRecord, QuoteSource, SourceError, SymbolSet};

const FIELDS: [&str; 5] = ["time", "close", "change", "pct_change", "volume"];

/// Serves recorded rows in file order, one per symbol per poll. Record
/// times come from the file, not the caller's clock.
#[derive(Debug, Clone, Default)]
pub struct ReplaySource {
    // rows without a symbol column are keyed by None
    queues: HashMap<Option<String>, VecDeque<QuoteRecord>>,
}

impl ReplaySource {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, SourceError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| SourceError::new(format!("cannot open {}: {e}", path.display())))?;
        Self::from_reader(file)
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, SourceError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| SourceError::new(format!("replay header: {e}")))?.clone();
        let column = |name: &str| headers.iter().position(|h| h == name);
        let mut idx = [0usize; 5];
        for (slot, name) in idx.iter_mut().zip(FIELDS) {
            *slot = column(name).ok_or_else(|| SourceError::new(format!("replay file lacks column {name}")))?;
        }
        let symbol_col = column("symbol");

        let mut queues: HashMap<Option<String>, VecDeque<QuoteRecord>> = HashMap::new();
        for (line, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| SourceError::new(format!("replay row {}: {e}", line + 2)))?;
            let field = |i: usize| row.get(i).unwrap_or("");
            let bad = |name: &str| SourceError::new(format!("replay row {}: bad {name}", line + 2));
            let num = |i: usize, name: &str| field(i).parse::<f64>().map_err(|_| bad(name));
            let record = QuoteRecord::new(
                field(idx[0]).parse::<i64>().map_err(|_| bad("time"))?,
                num(idx[1], "close")?,
                num(idx[2], "change")?,
                num(idx[3], "pct_change")?,
                num(idx[4], "volume")?,
            );
            record.validate().map_err(|e| SourceError::new(format!("replay row {}: {e}", line + 2)))?;
            let key = symbol_col.map(|c| field(c).to_owned());
            queues.entry(key).or_default().push_back(record);
        }
        Ok(ReplaySource { queues })
    }

    /// Rows left for `symbol` (or for the symbol-less queue).
    pub fn remaining(&self, symbol: &str) -> usize {
        self.queue_key(symbol).map_or(0, |k| self.queues[&k].len())
    }

    fn queue_key(&self, symbol: &str) -> Option<Option<String>> {
        let named = Some(symbol.to_owned());
        if self.queues.contains_key(&named) {
            Some(named)
        } else if self.queues.contains_key(&None) {
            Some(None)
        } else {
            None
        }
    }
}

impl QuoteSource for ReplaySource {
    fn poll(&mut self, symbols: &SymbolSet, _now: i64) -> Result<QuoteBatch, SourceError> {
        if symbols.len() > 1 && self.queues.contains_key(&None) {
            return Err(SourceError::new("replay file has no symbol column but several symbols are configured"));
        }
        let mut keys = Vec::with_capacity(symbols.len());
        for sym in symbols.symbols() {
            match self.queue_key(sym) {
                Some(k) if !self.queues[&k].is_empty() => keys.push((sym.clone(), k)),
                _ => return Err(SourceError::new(format!("replay exhausted for {sym}"))),
            }
        }
        let entries = keys
            .into_iter()
            .map(|(sym, k)| {
                let rec = self.queues.get_mut(&k).and_then(VecDeque::pop_front).expect("checked non-empty");
                (sym, rec)
            })
            .collect();
        QuoteBatch::from_entries(symbols, entries)
    }
}

fn record_fields(r: &QuoteRecord) -> [String; 5] {
    [
        r.time.to_string(),
        canonical_float(r.close),
        canonical_float(r.change),
        canonical_float(r.pct_change),
        canonical_float(r.volume),
    ]
}

/// Writes single-symbol replay CSV.
pub fn write_csv<'a>(out: impl Write, records: impl IntoIterator<Item = &'a QuoteRecord>) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIELDS)?;
    for r in records {
        w.write_record(record_fields(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes multi-symbol CSV with a leading `symbol` column.
pub fn write_symbol_csv<'a>(
    out: impl Write,
    rows: impl IntoIterator<Item = (&'a str, &'a QuoteRecord)>,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(std::iter::once("symbol").chain(FIELDS))?;
    for (sym, r) in rows {
        let [a, b, c, d, e] = record_fields(r);
        w.write_record([sym, &a, &b, &c, &d, &e])?;
    }
    w.flush()?;
    Ok(())
}

pub fn encode_csv(records: &[QuoteRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, records).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replays_row_verbatim() {
        let csv = "time,close,change,pct_change,volume\n1647381600,4261.75,-0.25,-0.0059,1200000\n";
        let mut src = ReplaySource::from_reader(csv.as_bytes()).unwrap();
        let syms = SymbolSet::single("ES=F");
        let batch = src.poll(&syms, 999).unwrap();
        assert_eq!(
            batch.get("ES=F"),
            Some(&QuoteRecord::new(1_647_381_600, 4261.75, -0.25, -0.0059, 1_200_000.0))
        );
        let err = src.poll(&syms, 999).unwrap_err();
        assert!(err.message.contains("exhausted"), "{err}");
    }

    #[test]
    fn symbol_column_routes_rows() {
        let csv = "symbol,time,close,change,pct_change,volume\n\
                   ES=F,10,1,0,0,5\nCL=F,10,2,0,0,6\nES=F,20,3,0,0,7\n";
        let mut src = ReplaySource::from_reader(csv.as_bytes()).unwrap();
        let syms = SymbolSet::new(["ES=F", "CL=F"], 0).unwrap();
        let b = src.poll(&syms, 0).unwrap();
        assert_eq!(b.get("CL=F").unwrap().close, 2.0);
        assert_eq!(src.remaining("ES=F"), 1);
        // CL=F is exhausted, so the whole batch fails and ES=F is not consumed
        assert!(src.poll(&syms, 0).is_err());
        assert_eq!(src.remaining("ES=F"), 1);
    }

    #[test]
    fn rejects_missing_columns_and_bad_numbers() {
        assert!(ReplaySource::from_reader("time,close\n1,2\n".as_bytes()).is_err());
        let bad = "time,close,change,pct_change,volume\n1,abc,0,0,0\n";
        assert!(ReplaySource::from_reader(bad.as_bytes()).is_err());
    }
}
