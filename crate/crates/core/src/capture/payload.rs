use std::fmt;

use thiserror::Error;

use crate::feed::{canonical_float, QuoteRecord};

const FIELD_NAMES: [&str; 5] = ["time", "close", "change", "pct_change", "volume"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PayloadError {
    #[error("expected 5 ';'-separated fields, found {0}")]
    FieldCount(usize),
    #[error("field {field} is not a finite number: {text:?}")]
    BadNumber { field: &'static str, text: String },
    #[error("time field is not integral: {0:?}")]
    NonIntegralTime(String),
    #[error("payload is not valid UTF-8")]
    NotUtf8,
}

/// The wire and storage form of one observation:
/// `time;close;change;pct_change;volume`.
///
/// Time is a decimal integer; the other fields use the shortest decimal
/// that round-trips the 64-bit value, so `encode(decode(p)) == p` for every
/// canonically formatted payload.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Payload(String);

impl Payload {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }

    pub fn into_string(self) -> String {
        self.0
    }

    pub fn decode(&self) -> Result<QuoteRecord, PayloadError> {
        decode_payload(&self.0)
    }
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn encode_payload(record: &QuoteRecord) -> Payload {
    Payload(format!(
        "{};{};{};{};{}",
        record.time,
        canonical_float(record.close),
        canonical_float(record.change),
        canonical_float(record.pct_change),
        canonical_float(record.volume),
    ))
}

pub fn decode_payload(text: &str) -> Result<QuoteRecord, PayloadError> {
    let fields: Vec<&str> = text.split(';').collect();
    if fields.len() != 5 {
        return Err(PayloadError::FieldCount(fields.len()));
    }
    let mut values = [0f64; 5];
    for (i, raw) in fields.iter().enumerate() {
        let v: f64 = raw
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| PayloadError::BadNumber { field: FIELD_NAMES[i], text: raw.to_string() })?;
        values[i] = v;
    }
    let time = match fields[0].trim().parse::<i64>() {
        Ok(t) => t,
        // integral values written in float notation, e.g. "1647381600.0"
        Err(_) if values[0].fract() == 0.0 && values[0].abs() < 9.0e15 => values[0] as i64,
        Err(_) => return Err(PayloadError::NonIntegralTime(fields[0].to_string())),
    };
    Ok(QuoteRecord::new(time, values[1], values[2], values[3], values[4]))
}

pub fn decode_payload_bytes(bytes: &[u8]) -> Result<QuoteRecord, PayloadError> {
    decode_payload(std::str::from_utf8(bytes).map_err(|_| PayloadError::NotUtf8)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ES: &str = "1647381600;4261.75;-0.25;-0.0059;1200000";

    #[test]
    fn reference_quote_payload() {
        let rec = QuoteRecord::new(1_647_381_600, 4261.75, -0.25, -0.0059, 1_200_000.0);
        assert_eq!(encode_payload(&rec).as_str(), ES);
        assert_eq!(decode_payload(ES).unwrap(), rec);
    }

    #[test]
    fn zero_payload() {
        let rec = QuoteRecord::new(1, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(encode_payload(&rec).as_str(), "1;0;0;0;0");
        assert_eq!(decode_payload("1;0;0;0;0").unwrap(), rec);
    }

    #[test]
    fn malformed_payloads() {
        assert_eq!(decode_payload("1;2;3;4"), Err(PayloadError::FieldCount(4)));
        assert_eq!(decode_payload("1;2;3;4;5;6"), Err(PayloadError::FieldCount(6)));
        assert!(matches!(decode_payload("1;x;3;4;5"), Err(PayloadError::BadNumber { field: "close", .. })));
        assert!(matches!(decode_payload("1;inf;3;4;5"), Err(PayloadError::BadNumber { .. })));
        assert!(matches!(decode_payload("1.5;1;3;4;5"), Err(PayloadError::NonIntegralTime(_))));
        assert_eq!(decode_payload("1647381600.0;1;2;3;4").unwrap().time, 1_647_381_600);
        assert_eq!(decode_payload_bytes(&[0xff]), Err(PayloadError::NotUtf8));
    }

    proptest! {
        #[test]
        fn canonical_payloads_round_trip(
            time in 1i64..4_000_000_000,
            close in -1e9f64..1e9,
            change in -1e6f64..1e6,
            pct in -100f64..100.0,
            volume in 0f64..1e12,
        ) {
            let rec = QuoteRecord::new(time, close, change, pct, volume);
            let payload = encode_payload(&rec);
            let back = payload.decode().unwrap();
            prop_assert_eq!(back, rec);
            prop_assert_eq!(encode_payload(&back), payload);
        }
    }
}
