use std::collections::BTreeMap;

use super::series::TimeSeries;

const DAY: i64 = 86_400;

pub const DEFAULT_NDAYS: usize = 2;
pub const DEFAULT_MINOBS: usize = 1500;

/// Trims `series` to its most recent `n` well-populated UTC days.
///
/// Days are UTC calendar dates. With fewer than `n` distinct days the
/// series is returned unchanged. Otherwise, among days holding more than
/// `minobs` points, the last `n` are taken and everything from midnight of
/// the earliest of them onward is kept. If no day qualifies (or `n` is 0)
/// the series is returned unchanged.
pub fn most_recent_n_days(series: &TimeSeries, n: usize, minobs: usize) -> TimeSeries {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for p in series.points() {
        *counts.entry(p.time.div_euclid(DAY)).or_default() += 1;
    }
    if counts.len() < n {
        return series.clone();
    }
    let qualifying: Vec<i64> = counts.into_iter().filter(|&(_, c)| c > minobs).map(|(d, _)| d).collect();
    let Some(&first_day) = qualifying[qualifying.len().saturating_sub(n)..].first() else {
        return series.clone();
    };
    let cutoff = first_day * DAY;
    let mut out = series.clone();
    out.retain(|p| p.time >= cutoff);
    out
}
