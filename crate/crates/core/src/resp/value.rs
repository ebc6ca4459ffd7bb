use std::io::Write;

/// A single node of the RESP2 grammar.
///
/// `SimpleString` and `Error` text must not contain CR or LF; the decoder
/// never produces such values and the encoder assumes they do not occur.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RespValue {
    SimpleString(String),
    Error(String),
    Integer(i64),
    BulkString(Vec<u8>),
    Array(Vec<RespValue>),
    Null,
}

impl RespValue {
    pub fn simple(text: impl Into<String>) -> Self {
        RespValue::SimpleString(text.into())
    }

    pub fn error(text: impl Into<String>) -> Self {
        RespValue::Error(text.into())
    }

    pub fn bulk(bytes: impl Into<Vec<u8>>) -> Self {
        RespValue::BulkString(bytes.into())
    }

    /// Appends the wire encoding of `self` to `out`.
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        match self {
            RespValue::SimpleString(text) => {
                debug_assert!(!text.contains(['\r', '\n']));
                out.push(b'+');
                out.extend_from_slice(text.as_bytes());
                out.extend_from_slice(b"\r\n");
            }
            RespValue::Error(text) => {
                debug_assert!(!text.contains(['\r', '\n']));
                out.push(b'-');
                out.extend_from_slice(text.as_bytes());
                out.extend_from_slice(b"\r\n");
            }
            RespValue::Integer(n) => {
                let _ = write!(out, ":{n}\r\n");
            }
            RespValue::BulkString(bytes) => write_bulk(out, bytes),
            RespValue::Array(items) => {
                let _ = write!(out, "*{}\r\n", items.len());
                for item in items {
                    item.encode_into(out);
                }
            }
            RespValue::Null => out.extend_from_slice(b"$-1\r\n"),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }

    /// Payload bytes of a bulk or simple string.
    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            RespValue::BulkString(bytes) => Some(bytes),
            RespValue::SimpleString(text) => Some(text.as_bytes()),
            _ => None,
        }
    }

    pub fn as_integer(&self) -> Option<i64> {
        match self {
            RespValue::Integer(n) => Some(*n),
            _ => None,
        }
    }

    pub fn into_array(self) -> Option<Vec<RespValue>> {
        match self {
            RespValue::Array(items) => Some(items),
            _ => None,
        }
    }

    pub fn is_error(&self) -> bool {
        matches!(self, RespValue::Error(_))
    }
}

fn write_bulk(out: &mut Vec<u8>, bytes: &[u8]) {
    let _ = write!(out, "${}\r\n", bytes.len());
    out.extend_from_slice(bytes);
    out.extend_from_slice(b"\r\n");
}

/// Encodes a client command as an array of bulk strings.
pub fn encode_command<P: AsRef<[u8]>>(parts: &[P]) -> Vec<u8> {
    debug_assert!(!parts.is_empty(), "a command needs at least a name");
    let mut out = Vec::with_capacity(16 + parts.iter().map(|p| p.as_ref().len() + 16).sum::<usize>());
    let _ = write!(out, "*{}\r\n", parts.len());
    for part in parts {
        write_bulk(&mut out, part.as_ref());
    }
    out
}
