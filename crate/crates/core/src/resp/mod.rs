//! RESP2 wire protocol: value type, encoder, incremental decoder and a
//! blocking client connection.

mod client;
mod decode;
mod value;

pub use client::{connect, ChannelMessage, ClientConnection, ClientError};
pub use decode::{decode, DecodeProgress, Decoder, DecoderLimits};
pub use value::{encode_command, RespValue};
