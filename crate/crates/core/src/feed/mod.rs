//! Quote sources: the record types, a seeded synthetic walk, CSV replay,
//! fault injection and an HTTP seam.

mod fault;
pub mod http;
mod record;
mod replay;
mod synthetic;

pub use fault::FaultInjectingSource;
pub use http::HttpSource;
pub use record::{
    canonical_float, poll, QuoteBatch, QuoteRecord, QuoteSource, SourceError, SymbolSet, SymbolSetError,
};
pub use replay::{encode_csv, write_csv, write_symbol_csv, ReplaySource};
pub use synthetic::{synthetic_step, SyntheticConfig, SyntheticSource, SyntheticState};
