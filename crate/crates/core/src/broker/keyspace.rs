//! Key-level command execution against the sorted-set keyspace.
//!
//! Argument parsing and reply texts follow a Redis 6.2 server so that the
//! broker's replies are byte-identical for the supported subset.

use std::collections::HashMap;

use super::sorted_set::{ScoreBound, SortedSet};
use crate::resp::RespValue;

pub(crate) const ERR_NOT_FLOAT: &str = "ERR value is not a valid float";
pub(crate) const ERR_NOT_INTEGER: &str = "ERR value is not an integer or out of range";
pub(crate) const ERR_BOUND: &str = "ERR min or max is not a float";
pub(crate) const ERR_SYNTAX: &str = "ERR syntax error";

#[derive(Debug, Default)]
pub struct Keyspace {
    sets: HashMap<Vec<u8>, SortedSet>,
}

impl Keyspace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &[u8]) -> Option<&SortedSet> {
        self.sets.get(key)
    }

    /// Adds or re-scores one member; returns 1 if it was newly added.
    pub fn zadd(&mut self, key: &[u8], score: f64, member: &[u8]) -> i64 {
        i64::from(self.sets.entry(key.to_vec()).or_default().insert(member, score))
    }

    pub fn zcard(&self, key: &[u8]) -> i64 {
        self.sets.get(key).map_or(0, |s| s.len() as i64)
    }

    pub fn zrange(&self, key: &[u8], start: i64, stop: i64) -> Vec<(Vec<u8>, f64)> {
        self.sets.get(key).map_or_else(Vec::new, |set| {
            set.range_by_rank(start, stop)
                .into_iter()
                .map(|(m, s)| (m.to_vec(), s))
                .collect()
        })
    }

    pub fn zcount(&self, key: &[u8], min: ScoreBound, max: ScoreBound) -> i64 {
        self.sets.get(key).map_or(0, |s| s.count_by_score(min, max) as i64)
    }

    pub fn zremrangebyscore(&mut self, key: &[u8], min: ScoreBound, max: ScoreBound) -> i64 {
        self.mutate(key, |set| set.remove_range_by_score(min, max))
    }

    pub fn zremrangebyrank(&mut self, key: &[u8], start: i64, stop: i64) -> i64 {
        self.mutate(key, |set| set.remove_range_by_rank(start, stop))
    }

    pub fn del<K: AsRef<[u8]>>(&mut self, keys: &[K]) -> i64 {
        keys.iter().filter(|k| self.sets.remove(k.as_ref()).is_some()).count() as i64
    }

    // empty sets are dropped so that DEL and key counts match the server
    fn mutate(&mut self, key: &[u8], f: impl FnOnce(&mut SortedSet) -> usize) -> i64 {
        let Some(set) = self.sets.get_mut(key) else {
            return 0;
        };
        let n = f(set);
        if set.is_empty() {
            self.sets.remove(key);
        }
        n as i64
    }

    /// Executes a keyspace command whose name is already lower-cased and
    /// whose arity has been checked. Returns `None` for commands that are
    /// not keyspace commands.
    pub fn execute(&mut self, name: &str, args: &[Vec<u8>]) -> Option<RespValue> {
        let reply = match name {
            "zadd" => self.exec_zadd(args),
            "zrange" => self.exec_zrange(args),
            "zcard" => RespValue::Integer(self.zcard(&args[0])),
            "zcount" => match parse_bounds(&args[1], &args[2]) {
                Ok((min, max)) => RespValue::Integer(self.zcount(&args[0], min, max)),
                Err(e) => e,
            },
            "zremrangebyscore" => match parse_bounds(&args[1], &args[2]) {
                Ok((min, max)) => RespValue::Integer(self.zremrangebyscore(&args[0], min, max)),
                Err(e) => e,
            },
            "zremrangebyrank" => match (parse_integer(&args[1]), parse_integer(&args[2])) {
                (Some(start), Some(stop)) => {
                    RespValue::Integer(self.zremrangebyrank(&args[0], start, stop))
                }
                _ => RespValue::error(ERR_NOT_INTEGER),
            },
            "del" => RespValue::Integer(self.del(args)),
            _ => return None,
        };
        Some(reply)
    }

    fn exec_zadd(&mut self, args: &[Vec<u8>]) -> RespValue {
        let pairs = &args[1..];
        if !pairs.len().is_multiple_of(2) {
            return RespValue::error(ERR_SYNTAX);
        }
        // validate every score before touching the set
        let mut parsed = Vec::with_capacity(pairs.len() / 2);
        for pair in pairs.chunks(2) {
            match parse_float(&pair[0]) {
                Some(score) => parsed.push((score, &pair[1])),
                None => return RespValue::error(ERR_NOT_FLOAT),
            }
        }
        let added = parsed
            .into_iter()
            .map(|(score, member)| self.zadd(&args[0], score, member))
            .sum();
        RespValue::Integer(added)
    }

    fn exec_zrange(&self, args: &[Vec<u8>]) -> RespValue {
        let with_scores = match args.get(3) {
            None => false,
            Some(opt) if opt.eq_ignore_ascii_case(b"withscores") && args.len() == 4 => true,
            Some(_) => return RespValue::error(ERR_SYNTAX),
        };
        let (Some(start), Some(stop)) = (parse_integer(&args[1]), parse_integer(&args[2])) else {
            return RespValue::error(ERR_NOT_INTEGER);
        };
        let mut items = Vec::new();
        for (member, score) in self.zrange(&args[0], start, stop) {
            items.push(RespValue::BulkString(member));
            if with_scores {
                items.push(RespValue::bulk(format_score(score)));
            }
        }
        RespValue::Array(items)
    }
}

/// Parses a score the way the server does: decimal or exponent notation,
/// `inf`/`-inf`/`+inf` accepted, NaN and surrounding whitespace rejected.
///
/// Hexadecimal floats, which the C library would also accept, are not.
pub fn parse_float(raw: &[u8]) -> Option<f64> {
    let text = std::str::from_utf8(raw).ok()?;
    if text.is_empty() || text.starts_with(|c: char| c.is_ascii_whitespace()) {
        return None;
    }
    text.parse::<f64>().ok().filter(|v| !v.is_nan())
}

/// Strict signed 64-bit parse: no `+`, no leading zeros, no `-0`.
pub fn parse_integer(raw: &[u8]) -> Option<i64> {
    if raw == b"0" {
        return Some(0);
    }
    let digits = raw.strip_prefix(b"-").unwrap_or(raw);
    match digits.first() {
        Some(b'1'..=b'9') if digits.iter().all(u8::is_ascii_digit) => {}
        _ => return None,
    }
    std::str::from_utf8(raw).ok()?.parse().ok()
}

pub fn parse_bound(raw: &[u8]) -> Option<ScoreBound> {
    match raw.strip_prefix(b"(") {
        Some(rest) => parse_float(rest).map(ScoreBound::exclusive),
        None => parse_float(raw).map(ScoreBound::inclusive),
    }
}

fn parse_bounds(min: &[u8], max: &[u8]) -> Result<(ScoreBound, ScoreBound), RespValue> {
    match (parse_bound(min), parse_bound(max)) {
        (Some(lo), Some(hi)) => Ok((lo, hi)),
        _ => Err(RespValue::error(ERR_BOUND)),
    }
}

/// Formats a score like C's `%.17g`, with `inf`/`-inf` for infinities.
pub fn format_score(value: f64) -> String {
    if value.is_infinite() {
        return if value > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{value:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integral exponent");
    if !(-4..17).contains(&exp) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let fixed = format!("{value:.prec$}", prec = (16 - exp) as usize);
        trim_fraction(&fixed).to_owned()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
