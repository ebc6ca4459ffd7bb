//! Capture: encodes quotes into payloads, stores them in per-symbol
//! sorted sets and publishes them on per-symbol channels.

mod daemon;
mod payload;

pub use daemon::{
    run_capture, store_and_publish, CaptureLimits, CaptureReport, CaptureState, QuoteStore, ReconnectingStore,
    StoreError,
};
pub use payload::{decode_payload, decode_payload_bytes, encode_payload, Payload, PayloadError};
