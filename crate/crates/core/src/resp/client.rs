use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::{encode_command, DecodeProgress, Decoder, RespValue};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("connection refused by {0}")]
    ConnectionRefused(String),
    #[error("timed out")]
    Timeout,
    #[error("connection closed by peer")]
    Closed,
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("command {0:?} is not allowed while subscribed")]
    Subscribed(String),
    #[error("connection has no active subscription")]
    NotSubscribed,
    #[error("server error: {0}")]
    Server(String),
}

/// One pub/sub push, decoded from a 3-element array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelMessage {
    pub kind: String,
    pub channel: String,
    /// Message body; for (un)subscribe acknowledgments the decimal
    /// subscription count.
    pub payload: Vec<u8>,
}

impl ChannelMessage {
    pub fn payload_str(&self) -> Option<&str> {
        std::str::from_utf8(&self.payload).ok()
    }

    fn from_push(value: RespValue) -> Result<Self, ClientError> {
        let items = match value {
            RespValue::Array(items) if items.len() == 3 => items,
            other => {
                return Err(ClientError::Protocol(format!("unexpected push shape: {other:?}")))
            }
        };
        let text = |v: &RespValue| -> Option<String> {
            match v {
                RespValue::Null => Some(String::new()),
                other => other.as_bytes().map(|b| String::from_utf8_lossy(b).into_owned()),
            }
        };
        let kind = text(&items[0]).ok_or_else(|| ClientError::Protocol("push kind".into()))?;
        let channel = text(&items[1]).ok_or_else(|| ClientError::Protocol("push channel".into()))?;
        let payload = match &items[2] {
            RespValue::Integer(n) => n.to_string().into_bytes(),
            RespValue::BulkString(b) => b.clone(),
            RespValue::SimpleString(s) => s.clone().into_bytes(),
            other => return Err(ClientError::Protocol(format!("push payload: {other:?}"))),
        };
        Ok(ChannelMessage { kind, channel, payload })
    }
}

/// A blocking RESP2 client connection.
///
/// Single owner: it may move between threads but is not shared. Bytes that
/// arrive after a complete reply stay buffered for the next read, so
/// pipelined or pushed values are never dropped or misattributed.
#[derive(Debug)]
pub struct ClientConnection {
    stream: TcpStream,
    buf: Vec<u8>,
    decoder: Decoder,
    reply_timeout: Duration,
    subscriptions: usize,
    // message pushes read while waiting for (un)subscribe acknowledgments
    pending: VecDeque<ChannelMessage>,
}

/// Opens a connection and verifies it with a PING exchange.
pub fn connect(host: &str, port: u16, timeout: Duration) -> Result<ClientConnection, ClientError> {
    ClientConnection::connect(host, port, timeout)
}

impl ClientConnection {
    pub fn connect(host: &str, port: u16, timeout: Duration) -> Result<Self, ClientError> {
        let target = format!("{host}:{port}");
        let addrs: Vec<_> = (host, port).to_socket_addrs()?.collect();
        let mut last_err = None;
        for addr in addrs {
            match TcpStream::connect_timeout(&addr, timeout) {
                Ok(stream) => {
                    stream.set_nodelay(true)?;
                    let mut conn = ClientConnection {
                        stream,
                        buf: Vec::new(),
                        decoder: Decoder::default(),
                        reply_timeout: timeout,
                        subscriptions: 0,
                        pending: VecDeque::new(),
                    };
                    match conn.command(&["PING"])? {
                        RespValue::SimpleString(s) if s == "PONG" || s == "OK" => return Ok(conn),
                        other => {
                            return Err(ClientError::Protocol(format!(
                                "unexpected PING reply {other:?}"
                            )))
                        }
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
        Err(match last_err {
            Some(e) if e.kind() == io::ErrorKind::ConnectionRefused => {
                ClientError::ConnectionRefused(target)
            }
            Some(e) if is_timeout(&e) => ClientError::Timeout,
            Some(e) => ClientError::Io(e),
            None => ClientError::Io(io::Error::new(
                io::ErrorKind::NotFound,
                format!("{target} did not resolve"),
            )),
        })
    }

    /// Timeout applied while waiting for a command reply.
    pub fn set_reply_timeout(&mut self, timeout: Duration) {
        self.reply_timeout = timeout;
    }

    pub fn subscription_count(&self) -> usize {
        self.subscriptions
    }

    pub fn is_subscribed(&self) -> bool {
        self.subscriptions > 0
    }

    /// Sends one command and returns its reply. Server error replies come
    /// back as [`RespValue::Error`].
    pub fn command<P: AsRef<[u8]>>(&mut self, parts: &[P]) -> Result<RespValue, ClientError> {
        let name = parts
            .first()
            .map(|p| String::from_utf8_lossy(p.as_ref()).to_ascii_uppercase())
            .unwrap_or_default();
        if self.is_subscribed() && !matches!(name.as_str(), "SUBSCRIBE" | "UNSUBSCRIBE" | "PING") {
            return Err(ClientError::Subscribed(name));
        }
        self.stream.write_all(&encode_command(parts))?;
        let deadline = Some(Instant::now() + self.reply_timeout);
        let mut reply = self.read_value(deadline)?;
        while self.is_subscribed() && is_message_push(&reply) {
            if let Ok(msg) = ChannelMessage::from_push(reply) {
                self.pending.push_back(msg);
            }
            reply = self.read_value(deadline)?;
        }
        if matches!(name.as_str(), "SUBSCRIBE" | "UNSUBSCRIBE") {
            self.track_ack(&reply);
        }
        Ok(reply)
    }

    /// Subscribes to each channel and returns the acknowledgments.
    pub fn subscribe<S: AsRef<str>>(&mut self, channels: &[S]) -> Result<Vec<ChannelMessage>, ClientError> {
        self.pubsub("SUBSCRIBE", channels)
    }

    pub fn unsubscribe<S: AsRef<str>>(&mut self, channels: &[S]) -> Result<Vec<ChannelMessage>, ClientError> {
        self.pubsub("UNSUBSCRIBE", channels)
    }

    fn pubsub<S: AsRef<str>>(&mut self, verb: &str, channels: &[S]) -> Result<Vec<ChannelMessage>, ClientError> {
        let mut parts: Vec<&[u8]> = vec![verb.as_bytes()];
        parts.extend(channels.iter().map(|c| c.as_ref().as_bytes()));
        self.stream.write_all(&encode_command(&parts))?;
        let deadline = Some(Instant::now() + self.reply_timeout);
        let expected = if channels.is_empty() {
            self.subscriptions.max(1)
        } else {
            channels.len()
        };
        let mut acks = Vec::with_capacity(expected);
        while acks.len() < expected {
            let value = self.read_value(deadline)?;
            if let RespValue::Error(e) = value {
                return Err(ClientError::Server(e));
            }
            let msg = ChannelMessage::from_push(value)?;
            if msg.kind == "message" {
                self.pending.push_back(msg);
                continue;
            }
            self.track_message(&msg);
            acks.push(msg);
        }
        Ok(acks)
    }

    /// Blocks for one push message. `Ok(None)` means the timeout elapsed
    /// with no complete message.
    pub fn listen(&mut self, timeout: Duration) -> Result<Option<ChannelMessage>, ClientError> {
        if !self.is_subscribed() && self.pending.is_empty() {
            return Err(ClientError::NotSubscribed);
        }
        if let Some(msg) = self.pending.pop_front() {
            return Ok(Some(msg));
        }
        match self.read_value(Some(Instant::now() + timeout)) {
            Ok(value) => {
                let msg = ChannelMessage::from_push(value)?;
                self.track_message(&msg);
                Ok(Some(msg))
            }
            Err(ClientError::Timeout) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn track_ack(&mut self, reply: &RespValue) {
        if let RespValue::Array(items) = reply {
            if let Some(n) = items.get(2).and_then(RespValue::as_integer) {
                self.subscriptions = n.max(0) as usize;
            }
        }
    }

    fn track_message(&mut self, msg: &ChannelMessage) {
        if msg.kind == "subscribe" || msg.kind == "unsubscribe" {
            if let Some(n) = msg.payload_str().and_then(|s| s.parse::<usize>().ok()) {
                self.subscriptions = n;
            }
        }
    }

    fn read_value(&mut self, deadline: Option<Instant>) -> Result<RespValue, ClientError> {
        let mut chunk = [0u8; 16 * 1024];
        loop {
            match self.decoder.decode(&self.buf) {
                DecodeProgress::Complete { value, consumed } => {
                    self.buf.drain(..consumed);
                    return Ok(value);
                }
                DecodeProgress::ProtocolError(msg) => return Err(ClientError::Protocol(msg)),
                DecodeProgress::NeedMoreBytes => {}
            }
            let wait = match deadline {
                Some(d) => {
                    let left = d.saturating_duration_since(Instant::now());
                    if left.is_zero() {
                        return Err(ClientError::Timeout);
                    }
                    Some(left)
                }
                None => None,
            };
            self.stream.set_read_timeout(wait)?;
            match self.stream.read(&mut chunk) {
                Ok(0) => return Err(ClientError::Closed),
                Ok(n) => self.buf.extend_from_slice(&chunk[..n]),
                Err(e) if is_timeout(&e) => return Err(ClientError::Timeout),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(ClientError::Io(e)),
            }
        }
    }
}

fn is_message_push(value: &RespValue) -> bool {
    match value {
        RespValue::Array(items) if items.len() == 3 => items[0].as_bytes() == Some(b"message"),
        _ => false,
    }
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut)
}
