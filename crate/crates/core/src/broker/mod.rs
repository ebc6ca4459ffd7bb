//! Minimal RESP2 broker: sorted sets plus channel pub/sub, enough to run
//! the capture and monitor pipeline without an external server.

mod keyspace;
mod server;
mod sorted_set;

pub use keyspace::{format_score, parse_bound, parse_float, parse_integer, Keyspace};
pub use server::{serve, Broker, BrokerConfig, BrokerError, BrokerHandle};
pub use sorted_set::{ScoreBound, SortedSet};
