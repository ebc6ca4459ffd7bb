//! Retention pruning: an age cap and a per-symbol count cap, applied with
//! atomic sorted-set range removals. The newest point of a non-empty
//! symbol is never removed.

use std::time::Duration;

use thiserror::Error;

use crate::resp::{ClientConnection, ClientError, RespValue};

const DAY_SECS: u64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetentionPolicy {
    pub max_age: Option<Duration>,
    /// Per-symbol cap; 0 disables it.
    pub max_points: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("retention policy needs an age limit or a nonzero point limit")]
pub struct PolicyError;

impl Default for RetentionPolicy {
    fn default() -> Self {
        RetentionPolicy { max_age: Some(Duration::from_secs(30 * DAY_SECS)), max_points: 200_000 }
    }
}

impl RetentionPolicy {
    pub fn new(max_age: Option<Duration>, max_points: u64) -> Result<Self, PolicyError> {
        if max_age.is_none() && max_points == 0 {
            return Err(PolicyError);
        }
        Ok(RetentionPolicy { max_age, max_points })
    }

    pub fn days(days: u64) -> Duration {
        Duration::from_secs(days * DAY_SECS)
    }
}

/// What pruning did (or, on a dry run, would do) to one symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pruned {
    pub by_age: u64,
    pub by_count: u64,
    pub remaining: u64,
}

impl Pruned {
    pub fn removed(&self) -> u64 {
        self.by_age + self.by_count
    }
}

#[derive(Debug)]
pub struct PruneOutcome {
    pub symbol: String,
    pub result: Result<Pruned, ClientError>,
}

/// Applies `policy` to each symbol in turn. `now` is epoch seconds. A
/// failure on one symbol is recorded and the rest are still attempted.
pub fn prune<S: AsRef<str>>(
    conn: &mut ClientConnection,
    symbols: &[S],
    policy: &RetentionPolicy,
    now: i64,
    dry_run: bool,
) -> Vec<PruneOutcome> {
    symbols
        .iter()
        .map(|s| PruneOutcome {
            symbol: s.as_ref().to_owned(),
            result: prune_symbol(conn, s.as_ref(), policy, now, dry_run),
        })
        .collect()
}

fn integer(reply: RespValue) -> Result<u64, ClientError> {
    match reply {
        RespValue::Integer(n) => Ok(n.max(0) as u64),
        RespValue::Error(e) => Err(ClientError::Server(e)),
        other => Err(ClientError::Protocol(format!("expected integer reply, got {other:?}"))),
    }
}

fn newest_score(conn: &mut ClientConnection, symbol: &str) -> Result<f64, ClientError> {
    let reply = conn.command(&["ZRANGE", symbol, "-1", "-1", "WITHSCORES"])?;
    let score = match &reply {
        RespValue::Array(items) if items.len() == 2 => items[1].as_bytes().and_then(|b| std::str::from_utf8(b).ok()),
        RespValue::Error(e) => return Err(ClientError::Server(e.clone())),
        _ => None,
    };
    score
        .and_then(|s| s.parse::<f64>().ok())
        .ok_or_else(|| ClientError::Protocol(format!("unexpected ZRANGE WITHSCORES reply: {reply:?}")))
}

fn prune_symbol(
    conn: &mut ClientConnection,
    symbol: &str,
    policy: &RetentionPolicy,
    now: i64,
    dry_run: bool,
) -> Result<Pruned, ClientError> {
    let card = integer(conn.command(&["ZCARD", symbol])?)?;
    if card == 0 {
        return Ok(Pruned::default());
    }
    let mut by_age = 0;
    if let Some(age) = policy.max_age {
        let cutoff = now.saturating_sub(age.as_secs() as i64);
        if newest_score(conn, symbol)? < cutoff as f64 {
            // everything is stale: keep only the newest member
            by_age = card - 1;
            if !dry_run && by_age > 0 {
                integer(conn.command(&["ZREMRANGEBYRANK", symbol, "0", "-2"])?)?;
            }
        } else {
            let upper = format!("({cutoff}");
            let verb = if dry_run { "ZCOUNT" } else { "ZREMRANGEBYSCORE" };
            by_age = integer(conn.command(&[verb, symbol, "-inf", &upper])?)?;
        }
    }
    let mut remaining = card - by_age;
    let mut by_count = 0;
    if policy.max_points > 0 && remaining > policy.max_points {
        by_count = remaining - policy.max_points;
        if !dry_run {
            let last = (by_count - 1).to_string();
            by_count = integer(conn.command(&["ZREMRANGEBYRANK", symbol, "0", &last])?)?;
        }
    }
    remaining -= by_count;
    Ok(Pruned { by_age, by_count, remaining })
}
