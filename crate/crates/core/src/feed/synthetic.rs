//! Seeded random-walk quotes for tests and demos.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::record::{QuoteBatch, QuoteRecord, QuoteSource, SourceError, SymbolSet};

const DAY_SECS: i64 = 86_400;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    /// Half-width of the uniform per-step relative price move.
    pub step_fraction: f64,
    /// Probability that a step trades (volume increases).
    pub p_trade: f64,
    /// Largest single-step volume increment.
    pub max_trade_size: u32,
    /// Session start as seconds after 00:00 UTC; change fields reset here.
    pub session_offset_secs: i64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            step_fraction: 0.001,
            p_trade: 0.9,
            max_trade_size: 250,
            session_offset_secs: 0,
        }
    }
}

/// Per-symbol walk state.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticState {
    pub session_open: f64,
    pub close: f64,
    pub volume: f64,
    pub session: Option<i64>,
}

impl SyntheticState {
    pub fn new(price: f64, volume: f64) -> Self {
        SyntheticState { session_open: price, close: price, volume, session: None }
    }
}

fn round_to(value: f64, places: i32) -> f64 {
    let scale = 10f64.powi(places);
    (value * scale).round() / scale
}

/// Advances one symbol's walk to time `now` and returns the observation.
///
/// Prices move by a uniform relative step and are rounded to cents.
/// Change and percent change are measured against the price at the start of
/// the current session.
pub fn synthetic_step(state: &mut SyntheticState, now: i64, config: &SyntheticConfig, rng: &mut impl Rng) -> QuoteRecord {
    let session = (now - config.session_offset_secs).div_euclid(DAY_SECS);
    if state.session != Some(session) {
        state.session = Some(session);
        state.session_open = state.close;
    }
    let eps = if config.step_fraction > 0.0 {
        rng.gen_range(-config.step_fraction..=config.step_fraction)
    } else {
        0.0
    };
    state.close = round_to(state.close * (1.0 + eps), 2).max(0.01);
    if rng.gen_bool(config.p_trade.clamp(0.0, 1.0)) {
        state.volume += f64::from(rng.gen_range(1..=config.max_trade_size.max(1)));
    }
    let change = round_to(state.close - state.session_open, 2);
    let pct_change = round_to(100.0 * (state.close - state.session_open) / state.session_open, 4);
    QuoteRecord::new(now, state.close, change, pct_change, state.volume)
}

/// Deterministic source: identical seed, config and poll times give
/// identical records.
#[derive(Debug, Clone)]
pub struct SyntheticSource {
    config: SyntheticConfig,
    rng: ChaCha8Rng,
    states: HashMap<String, SyntheticState>,
}

impl SyntheticSource {
    pub fn new(seed: u64, config: SyntheticConfig) -> Self {
        SyntheticSource {
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            states: HashMap::new(),
        }
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.config
    }
}

impl QuoteSource for SyntheticSource {
    fn poll(&mut self, symbols: &SymbolSet, now: i64) -> Result<QuoteBatch, SourceError> {
        if now <= 0 {
            return Err(SourceError::new(format!("clock reads non-positive time {now}")));
        }
        let mut entries = Vec::with_capacity(symbols.len());
        for sym in symbols.symbols() {
            let rng = &mut self.rng;
            let state = self.states.entry(sym.clone()).or_insert_with(|| {
                let price = round_to(rng.gen_range(50.0..5000.0), 2);
                let volume = f64::from(rng.gen_range(1_000u32..100_000));
                SyntheticState::new(price, volume)
            });
            entries.push((sym.clone(), synthetic_step(state, now, &self.config, &mut self.rng)));
        }
        QuoteBatch::from_entries(symbols, entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walk(p_trade: f64, steps: usize) -> Vec<QuoteRecord> {
        let cfg = SyntheticConfig { p_trade, ..SyntheticConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut state = SyntheticState::new(4261.75, 1_200_000.0);
        (0..steps)
            .map(|i| synthetic_step(&mut state, 1_647_381_600 + 10 * i as i64, &cfg, &mut rng))
            .collect()
    }

    #[test]
    fn always_trading_strictly_increases_volume() {
        let recs = walk(1.0, 100);
        assert!(recs.windows(2).all(|w| w[1].volume > w[0].volume));
    }

    #[test]
    fn never_trading_keeps_volume_flat() {
        let recs = walk(0.0, 100);
        assert!(recs.iter().all(|r| r.volume == 1_200_000.0));
    }

    #[test]
    fn steps_stay_within_bound() {
        let recs = walk(0.9, 500);
        for w in recs.windows(2) {
            let rel = (w[1].close / w[0].close - 1.0).abs();
            // cent rounding can add at most half a cent on top of the step
            assert!(rel <= 0.001 + 0.005 / w[0].close + 1e-12, "{rel}");
        }
    }

    #[test]
    fn seeded_source_is_deterministic() {
        let syms = SymbolSet::new(["BTC=F", "CL=F", "ES=F"], 2).unwrap();
        let run = || {
            let mut src = SyntheticSource::new(42, SyntheticConfig::default());
            (0..3)
                .map(|i| src.poll(&syms, 1_647_381_600 + i * 10).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
        let first = &run()[0];
        assert_eq!(first.get("ES=F").unwrap().time, 1_647_381_600);
        assert!(first.iter().all(|(_, r)| r.close.is_finite() && r.validate().is_ok()));
    }

    #[test]
    fn change_resets_at_session_boundary() {
        let cfg = SyntheticConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut state = SyntheticState::new(100.0, 0.0);
        let day_end = 1_647_388_800 - 10;
        synthetic_step(&mut state, day_end - 20, &cfg, &mut rng);
        let before = synthetic_step(&mut state, day_end, &cfg, &mut rng);
        let after = synthetic_step(&mut state, day_end + 10, &cfg, &mut rng);
        assert_eq!(state.session_open, before.close);
        assert_eq!(after.change, round_to(after.close - before.close, 2));
    }
}
