use std::collections::{HashMap, VecDeque};
use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use thiserror::Error;

use super::keyspace::Keyspace;
use crate::clock::ShutdownSignal;
use crate::resp::{DecodeProgress, Decoder, DecoderLimits, RespValue};

#[derive(Debug, Error)]
pub enum BrokerError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy)]
pub struct BrokerConfig {
    /// Queued outbound bytes after which a connection is dropped.
    pub max_outbound_bytes: usize,
    pub decoder: DecoderLimits,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        BrokerConfig {
            max_outbound_bytes: 8 << 20,
            decoder: DecoderLimits::default(),
        }
    }
}

type ClientId = u64;

/// Outbound byte queue drained by a connection's writer thread. Pushing
/// never blocks; exceeding the byte limit aborts the connection instead.
struct Outbox {
    state: Mutex<OutboxState>,
    ready: Condvar,
    limit: usize,
}

#[derive(Default)]
struct OutboxState {
    queue: VecDeque<Vec<u8>>,
    bytes: usize,
    closing: bool,
    aborted: bool,
}

impl Outbox {
    fn new(limit: usize) -> Self {
        Outbox {
            state: Mutex::new(OutboxState::default()),
            ready: Condvar::new(),
            limit,
        }
    }

    fn lock(&self) -> MutexGuard<'_, OutboxState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Queues `bytes`; false when the connection is going away or the
    /// limit was hit (which aborts it).
    fn push(&self, bytes: Vec<u8>) -> bool {
        let mut st = self.lock();
        if st.aborted || st.closing {
            return false;
        }
        if st.bytes + bytes.len() > self.limit {
            st.aborted = true;
            st.queue.clear();
            st.bytes = 0;
            self.ready.notify_all();
            return false;
        }
        st.bytes += bytes.len();
        st.queue.push_back(bytes);
        self.ready.notify_all();
        true
    }

    /// Flush what is queued, then stop.
    fn close(&self) {
        self.lock().closing = true;
        self.ready.notify_all();
    }

    fn abort(&self) {
        let mut st = self.lock();
        st.aborted = true;
        st.queue.clear();
        st.bytes = 0;
        self.ready.notify_all();
    }

    fn is_aborted(&self) -> bool {
        self.lock().aborted
    }

    fn next(&self) -> Option<Vec<u8>> {
        let mut st = self.lock();
        loop {
            if st.aborted {
                return None;
            }
            if let Some(bytes) = st.queue.pop_front() {
                st.bytes -= bytes.len();
                return Some(bytes);
            }
            if st.closing {
                return None;
            }
            st = self.ready.wait(st).unwrap_or_else(|e| e.into_inner());
        }
    }
}

struct Client {
    outbox: Arc<Outbox>,
    // subscription order is kept for bare UNSUBSCRIBE replies
    channels: Vec<Vec<u8>>,
    stream: TcpStream,
}

impl Client {
    fn send(&self, value: &RespValue) {
        if !self.outbox.push(value.to_bytes()) && self.outbox.is_aborted() {
            let _ = self.stream.shutdown(Shutdown::Both);
        }
    }
}

#[derive(Default)]
struct State {
    keyspace: Keyspace,
    channels: HashMap<Vec<u8>, Vec<ClientId>>,
    clients: HashMap<ClientId, Client>,
    next_id: ClientId,
}

impl State {
    fn remove_client(&mut self, id: ClientId) {
        if let Some(client) = self.clients.remove(&id) {
            for ch in &client.channels {
                self.detach(ch, id);
            }
        }
    }

    fn detach(&mut self, channel: &[u8], id: ClientId) {
        if let Some(ids) = self.channels.get_mut(channel) {
            ids.retain(|&c| c != id);
            if ids.is_empty() {
                self.channels.remove(channel);
            }
        }
    }

    /// Sends a message push to every subscriber; returns how many got it.
    fn publish(&mut self, channel: &[u8], payload: &[u8]) -> i64 {
        let Some(ids) = self.channels.get(channel) else {
            return 0;
        };
        let push = RespValue::Array(vec![
            RespValue::bulk("message"),
            RespValue::bulk(channel),
            RespValue::bulk(payload),
        ])
        .to_bytes();
        let mut delivered = 0;
        for id in ids {
            if let Some(client) = self.clients.get(id) {
                if client.outbox.push(push.clone()) {
                    delivered += 1;
                } else if client.outbox.is_aborted() {
                    let _ = client.stream.shutdown(Shutdown::Both);
                }
            }
        }
        delivered
    }

    fn subscription_count(&self, id: ClientId) -> usize {
        self.clients.get(&id).map_or(0, |c| c.channels.len())
    }
}

struct Shared {
    state: Mutex<State>,
    config: BrokerConfig,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// A bound broker, ready to serve.
pub struct Broker {
    listener: TcpListener,
    shared: Arc<Shared>,
}

/// Binds and serves until `shutdown` fires.
pub fn serve(bind: &str, port: u16, shutdown: &ShutdownSignal) -> Result<(), BrokerError> {
    Broker::bind(bind, port, BrokerConfig::default())?.run(shutdown)
}

impl Broker {
    pub fn bind(host: &str, port: u16, config: BrokerConfig) -> Result<Self, BrokerError> {
        let addr = format!("{host}:{port}");
        let listener = TcpListener::bind(&addr).map_err(|source| BrokerError::Bind { addr, source })?;
        Ok(Broker {
            listener,
            shared: Arc::new(Shared {
                state: Mutex::new(State::default()),
                config,
            }),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    /// Accepts connections until `shutdown` fires, then closes every
    /// connection and drops all keys and subscriptions.
    pub fn run(self, shutdown: &ShutdownSignal) -> Result<(), BrokerError> {
        self.listener.set_nonblocking(true)?;
        let mut workers: Vec<JoinHandle<()>> = Vec::new();
        while !shutdown.is_triggered() {
            match self.listener.accept() {
                Ok((stream, _)) => {
                    workers.retain(|w| !w.is_finished());
                    match self.register(stream) {
                        Ok(worker) => workers.push(worker),
                        Err(_) => continue,
                    }
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                    shutdown.wait_timeout(Duration::from_millis(5));
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(_) => {
                    shutdown.wait_timeout(Duration::from_millis(5));
                }
            }
        }
        {
            let st = self.shared.lock();
            for client in st.clients.values() {
                client.outbox.abort();
                let _ = client.stream.shutdown(Shutdown::Both);
            }
        }
        for worker in workers {
            let _ = worker.join();
        }
        *self.shared.lock() = State::default();
        Ok(())
    }

    /// Runs the broker on a background thread.
    pub fn spawn(self) -> BrokerHandle {
        let addr = self.local_addr();
        let signal = ShutdownSignal::new();
        let thread_signal = signal.clone();
        let thread = thread::Builder::new()
            .name("broker-accept".into())
            .spawn(move || self.run(&thread_signal))
            .expect("spawn broker thread");
        BrokerHandle { addr, signal, thread: Some(thread) }
    }

    fn register(&self, stream: TcpStream) -> io::Result<JoinHandle<()>> {
        stream.set_nonblocking(false)?;
        stream.set_nodelay(true)?;
        let outbox = Arc::new(Outbox::new(self.shared.config.max_outbound_bytes));
        let id = {
            let mut st = self.shared.lock();
            let id = st.next_id;
            st.next_id += 1;
            st.clients.insert(
                id,
                Client { outbox: Arc::clone(&outbox), channels: Vec::new(), stream: stream.try_clone()? },
            );
            id
        };
        let shared = Arc::clone(&self.shared);
        thread::Builder::new()
            .name(format!("broker-conn-{id}"))
            .spawn(move || connection_loop(shared, id, stream, outbox))
    }
}

/// Handle to a broker running on a background thread. Dropping it shuts
/// the broker down.
pub struct BrokerHandle {
    addr: SocketAddr,
    signal: ShutdownSignal,
    thread: Option<JoinHandle<Result<(), BrokerError>>>,
}

impl BrokerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn port(&self) -> u16 {
        self.addr.port()
    }

    pub fn shutdown(mut self) -> Result<(), BrokerError> {
        self.stop()
    }

    fn stop(&mut self) -> Result<(), BrokerError> {
        self.signal.trigger();
        match self.thread.take() {
            Some(t) => t.join().unwrap_or(Ok(())),
            None => Ok(()),
        }
    }
}

impl Drop for BrokerHandle {
    fn drop(&mut self) {
        let _ = self.stop();
    }
}

fn writer_loop(mut stream: TcpStream, outbox: Arc<Outbox>) {
    while let Some(bytes) = outbox.next() {
        if stream.write_all(&bytes).is_err() {
            outbox.abort();
            break;
        }
    }
    let _ = stream.shutdown(Shutdown::Both);
}

fn connection_loop(shared: Arc<Shared>, id: ClientId, mut stream: TcpStream, outbox: Arc<Outbox>) {
    let writer = match stream.try_clone() {
        Ok(w) => {
            let outbox = Arc::clone(&outbox);
            thread::spawn(move || writer_loop(w, outbox))
        }
        Err(_) => {
            shared.lock().remove_client(id);
            return;
        }
    };
    let decoder = Decoder::new(shared.config.decoder);
    let mut buf = Vec::new();
    let mut chunk = [0u8; 16 * 1024];
    'conn: loop {
        let n = match stream.read(&mut chunk) {
            Ok(0) | Err(_) => break,
            Ok(n) => n,
        };
        buf.extend_from_slice(&chunk[..n]);
        loop {
            match decoder.decode(&buf) {
                DecodeProgress::NeedMoreBytes => break,
                DecodeProgress::ProtocolError(msg) => {
                    outbox.push(RespValue::error(format!("ERR Protocol error: {msg}")).to_bytes());
                    break 'conn;
                }
                DecodeProgress::Complete { value, consumed } => {
                    buf.drain(..consumed);
                    let Some(args) = command_args(value) else {
                        outbox.push(
                            RespValue::error("ERR Protocol error: expected an array of bulk strings")
                                .to_bytes(),
                        );
                        break 'conn;
                    };
                    if args.is_empty() {
                        continue;
                    }
                    let mut st = shared.lock();
                    if dispatch(&mut st, id, args) == Flow::Close {
                        break 'conn;
                    }
                }
            }
        }
    }
    shared.lock().remove_client(id);
    outbox.close();
    let _ = writer.join();
}

fn command_args(value: RespValue) -> Option<Vec<Vec<u8>>> {
    value
        .into_array()?
        .into_iter()
        .map(|v| match v {
            RespValue::BulkString(b) => Some(b),
            _ => None,
        })
        .collect()
}

#[derive(PartialEq, Eq)]
enum Flow {
    Continue,
    Close,
}

/// Arity in the server's convention: positive means exact, negative means
/// at least that many (command name included).
fn arity(name: &str) -> Option<i32> {
    Some(match name {
        "ping" => -1,
        "quit" => -1,
        "zadd" => -4,
        "zrange" => -4,
        "zcard" => 2,
        "zcount" => 4,
        "zremrangebyscore" => 4,
        "zremrangebyrank" => 4,
        "del" => -2,
        "publish" => 3,
        "subscribe" => -2,
        "unsubscribe" => -1,
        _ => return None,
    })
}

fn unknown_command(raw_name: &[u8], args: &[Vec<u8>]) -> RespValue {
    let mut listed = String::new();
    for arg in args {
        if listed.len() >= 128 {
            break;
        }
        let arg = String::from_utf8_lossy(arg);
        let room = 128 - listed.len();
        let shown: String = arg.chars().take(room).collect();
        listed.push_str(&format!("`{shown}`, "));
    }
    let name: String = String::from_utf8_lossy(raw_name).chars().take(128).collect();
    RespValue::error(format!("ERR unknown command `{name}`, with args beginning with: {listed}"))
}

fn dispatch(st: &mut State, id: ClientId, mut args: Vec<Vec<u8>>) -> Flow {
    let raw_name = args.remove(0);
    let name = String::from_utf8_lossy(&raw_name).to_ascii_lowercase();
    let Some(client) = st.clients.get(&id) else {
        return Flow::Close;
    };
    let Some(arity) = arity(&name) else {
        client.send(&unknown_command(&raw_name, &args));
        return Flow::Continue;
    };
    let argc = args.len() as i32 + 1;
    if (arity > 0 && argc != arity) || (arity < 0 && argc < -arity) || (name == "ping" && argc > 2) {
        client.send(&RespValue::error(format!(
            "ERR wrong number of arguments for '{name}' command"
        )));
        return Flow::Continue;
    }
    let subscribed = !client.channels.is_empty();
    if subscribed && !matches!(name.as_str(), "subscribe" | "unsubscribe" | "ping" | "quit") {
        client.send(&RespValue::error(format!(
            "ERR Can't execute '{name}': only (P)SUBSCRIBE / (P)UNSUBSCRIBE / PING / QUIT / RESET are allowed in this context"
        )));
        return Flow::Continue;
    }

    match name.as_str() {
        "ping" => {
            let reply = match (subscribed, args.pop()) {
                (true, arg) => RespValue::Array(vec![
                    RespValue::bulk("pong"),
                    RespValue::bulk(arg.unwrap_or_default()),
                ]),
                (false, Some(arg)) => RespValue::BulkString(arg),
                (false, None) => RespValue::simple("PONG"),
            };
            client.send(&reply);
        }
        "quit" => {
            client.send(&RespValue::simple("OK"));
            return Flow::Close;
        }
        "publish" => {
            let n = st.publish(&args[0], &args[1]);
            if let Some(client) = st.clients.get(&id) {
                client.send(&RespValue::Integer(n));
            }
        }
        "subscribe" => {
            for channel in args {
                subscribe(st, id, channel);
            }
        }
        "unsubscribe" => {
            let targets = if args.is_empty() {
                st.clients.get(&id).map(|c| c.channels.clone()).unwrap_or_default()
            } else {
                args
            };
            if targets.is_empty() {
                client_send(st, id, pubsub_ack("unsubscribe", None, 0));
            }
            for channel in targets {
                unsubscribe(st, id, channel);
            }
        }
        _ => {
            let reply = st
                .keyspace
                .execute(&name, &args)
                .unwrap_or_else(|| unknown_command(&raw_name, &args));
            client_send(st, id, reply);
        }
    }
    Flow::Continue
}

fn client_send(st: &State, id: ClientId, reply: RespValue) {
    if let Some(client) = st.clients.get(&id) {
        client.send(&reply);
    }
}

fn pubsub_ack(kind: &str, channel: Option<&[u8]>, count: usize) -> RespValue {
    RespValue::Array(vec![
        RespValue::bulk(kind),
        channel.map_or(RespValue::Null, RespValue::bulk),
        RespValue::Integer(count as i64),
    ])
}

fn subscribe(st: &mut State, id: ClientId, channel: Vec<u8>) {
    let Some(client) = st.clients.get_mut(&id) else {
        return;
    };
    if !client.channels.contains(&channel) {
        client.channels.push(channel.clone());
        st.channels.entry(channel.clone()).or_default().push(id);
    }
    let count = st.subscription_count(id);
    client_send(st, id, pubsub_ack("subscribe", Some(&channel), count));
}

fn unsubscribe(st: &mut State, id: ClientId, channel: Vec<u8>) {
    let Some(client) = st.clients.get_mut(&id) else {
        return;
    };
    let before = client.channels.len();
    client.channels.retain(|c| c != &channel);
    if client.channels.len() != before {
        st.detach(&channel, id);
    }
    let count = st.subscription_count(id);
    client_send(st, id, pubsub_ack("unsubscribe", Some(&channel), count));
}
