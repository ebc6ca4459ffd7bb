//! Incremental RESP2 decoder.
//!
//! The decoder is a pure function of the buffered bytes: callers append
//! whatever arrived from the socket and call [`Decoder::decode`] again.
//! A value is reported `Complete` only once every byte of it is present,
//! and malformed input is rejected at the first byte that cannot extend
//! any valid encoding.

use super::RespValue;

/// Bounds applied while decoding untrusted input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderLimits {
    /// Maximum array nesting; a top-level array has depth 1.
    pub max_depth: usize,
    /// Maximum element count of a single array.
    pub max_elements: usize,
    /// Maximum byte length of a single bulk string.
    pub max_bulk_len: usize,
}

impl Default for DecoderLimits {
    fn default() -> Self {
        DecoderLimits {
            max_depth: 32,
            max_elements: 1 << 20,
            max_bulk_len: 1 << 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeProgress {
    Complete { value: RespValue, consumed: usize },
    NeedMoreBytes,
    ProtocolError(String),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Decoder {
    limits: DecoderLimits,
}

/// Decodes one value with the default limits.
pub fn decode(buffer: &[u8]) -> DecodeProgress {
    Decoder::default().decode(buffer)
}

enum Stop {
    Incomplete,
    Invalid(String),
}

type Step<T> = Result<(T, usize), Stop>;

fn invalid<T>(msg: impl Into<String>) -> Result<T, Stop> {
    Err(Stop::Invalid(msg.into()))
}

impl Decoder {
    pub fn new(limits: DecoderLimits) -> Self {
        Decoder { limits }
    }

    pub fn limits(&self) -> DecoderLimits {
        self.limits
    }

    pub fn decode(&self, buffer: &[u8]) -> DecodeProgress {
        match self.value(buffer, 0, 0) {
            Ok((value, consumed)) => DecodeProgress::Complete { value, consumed },
            Err(Stop::Incomplete) => DecodeProgress::NeedMoreBytes,
            Err(Stop::Invalid(msg)) => DecodeProgress::ProtocolError(msg),
        }
    }

    fn value(&self, buf: &[u8], pos: usize, depth: usize) -> Step<RespValue> {
        let Some(&kind) = buf.get(pos) else {
            return Err(Stop::Incomplete);
        };
        let pos = pos + 1;
        match kind {
            b'+' => {
                let (text, next) = text_line(buf, pos)?;
                Ok((RespValue::SimpleString(text), next))
            }
            b'-' => {
                let (text, next) = text_line(buf, pos)?;
                Ok((RespValue::Error(text), next))
            }
            b':' => {
                let (n, next) = integer_line(buf, pos)?;
                Ok((RespValue::Integer(n), next))
            }
            b'$' => {
                let (len, next) = length_line(buf, pos, self.limits.max_bulk_len, "bulk length")?;
                let Some(len) = len else {
                    return Ok((RespValue::Null, next));
                };
                let end = next + len;
                match buf.get(end) {
                    None => return Err(Stop::Incomplete),
                    Some(b'\r') => {}
                    Some(_) => return invalid("bulk string not terminated by CRLF"),
                }
                match buf.get(end + 1) {
                    None => Err(Stop::Incomplete),
                    Some(b'\n') => Ok((RespValue::BulkString(buf[next..end].to_vec()), end + 2)),
                    Some(_) => invalid("bulk string not terminated by CRLF"),
                }
            }
            b'*' => {
                if depth + 1 > self.limits.max_depth {
                    return invalid(format!("array nesting exceeds {}", self.limits.max_depth));
                }
                let (count, mut next) =
                    length_line(buf, pos, self.limits.max_elements, "array length")?;
                let Some(count) = count else {
                    return Ok((RespValue::Null, next));
                };
                let mut items = Vec::with_capacity(count.min(64));
                for _ in 0..count {
                    let (item, after) = self.value(buf, next, depth + 1)?;
                    items.push(item);
                    next = after;
                }
                Ok((RespValue::Array(items), next))
            }
            other => invalid(format!("unexpected type byte 0x{other:02x}")),
        }
    }
}

/// Reads text up to CRLF. A bare CR or LF inside the text is an error.
fn text_line(buf: &[u8], start: usize) -> Step<String> {
    let mut i = start;
    while let Some(&b) = buf.get(i) {
        match b {
            b'\r' => {
                return match buf.get(i + 1) {
                    None => Err(Stop::Incomplete),
                    Some(b'\n') => match std::str::from_utf8(&buf[start..i]) {
                        Ok(text) => Ok((text.to_owned(), i + 2)),
                        Err(_) => invalid("simple string is not valid UTF-8"),
                    },
                    Some(_) => invalid("CR not followed by LF"),
                };
            }
            b'\n' => return invalid("LF without preceding CR"),
            _ => i += 1,
        }
    }
    Err(Stop::Incomplete)
}

fn expect_lf(buf: &[u8], i: usize) -> Result<usize, Stop> {
    match buf.get(i) {
        None => Err(Stop::Incomplete),
        Some(b'\n') => Ok(i + 1),
        Some(_) => invalid("CR not followed by LF"),
    }
}

/// Signed decimal integer terminated by CRLF. A leading `+` is rejected;
/// leading zeros are accepted.
fn integer_line(buf: &[u8], start: usize) -> Step<i64> {
    let mut i = start;
    let negative = buf.get(i) == Some(&b'-');
    if negative {
        i += 1;
    }
    let digits_start = i;
    let mut acc: i64 = 0;
    loop {
        let Some(&b) = buf.get(i) else {
            return Err(Stop::Incomplete);
        };
        match b {
            b'0'..=b'9' => {
                let d = i64::from(b - b'0');
                acc = acc
                    .checked_mul(10)
                    .and_then(|v| if negative { v.checked_sub(d) } else { v.checked_add(d) })
                    .ok_or_else(|| Stop::Invalid("integer out of range".into()))?;
                i += 1;
            }
            b'\r' if i > digits_start => return Ok((acc, expect_lf(buf, i + 1)?)),
            b'\r' => return invalid("empty integer"),
            _ => return invalid(format!("invalid byte 0x{b:02x} in integer")),
        }
    }
}

/// Length prefix of a bulk string or array. `-1` denotes null; any other
/// negative value, or a value above `limit`, is rejected.
fn length_line(buf: &[u8], start: usize, limit: usize, what: &str) -> Step<Option<usize>> {
    if buf.get(start) == Some(&b'-') {
        return match buf.get(start + 1) {
            None => Err(Stop::Incomplete),
            Some(b'1') => match buf.get(start + 2) {
                None => Err(Stop::Incomplete),
                Some(b'\r') => Ok((None, expect_lf(buf, start + 3)?)),
                Some(_) => invalid(format!("invalid negative {what}")),
            },
            Some(_) => invalid(format!("invalid negative {what}")),
        };
    }
    let mut i = start;
    let mut acc: usize = 0;
    loop {
        let Some(&b) = buf.get(i) else {
            return Err(Stop::Incomplete);
        };
        match b {
            b'0'..=b'9' => {
                acc = acc
                    .checked_mul(10)
                    .and_then(|v| v.checked_add(usize::from(b - b'0')))
                    .filter(|&v| v <= limit)
                    .ok_or_else(|| Stop::Invalid(format!("{what} exceeds limit {limit}")))?;
                i += 1;
            }
            b'\r' if i > start => return Ok((Some(acc), expect_lf(buf, i + 1)?)),
            b'\r' => return invalid(format!("empty {what}")),
            _ => return invalid(format!("invalid byte 0x{b:02x} in {what}")),
        }
    }
}
