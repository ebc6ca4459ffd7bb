use crate::feed::QuoteRecord;

/// One symbol's observations, strictly increasing in time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    pub symbol: String,
    points: Vec<QuoteRecord>,
}

impl TimeSeries {
    pub fn new(symbol: impl Into<String>) -> Self {
        TimeSeries { symbol: symbol.into(), points: Vec::new() }
    }

    /// Builds a series from points in any order; on timestamp collisions
    /// the earliest in iteration order wins.
    pub fn from_points(symbol: impl Into<String>, points: impl IntoIterator<Item = QuoteRecord>) -> Self {
        let mut s = Self::new(symbol);
        s.append_dedup(points);
        s
    }

    pub fn points(&self) -> &[QuoteRecord] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&QuoteRecord> {
        self.points.last()
    }

    pub fn get(&self, time: i64) -> Option<&QuoteRecord> {
        self.points.binary_search_by_key(&time, |p| p.time).ok().map(|i| &self.points[i])
    }

    /// Merges `points` in time order. A point whose timestamp is already
    /// present is dropped: the first arrival is kept. Returns how many
    /// points were inserted.
    pub fn append_dedup(&mut self, points: impl IntoIterator<Item = QuoteRecord>) -> usize {
        let mut added = 0;
        for p in points {
            // the common case is a fresh point at the end
            if self.points.last().is_none_or(|last| last.time < p.time) {
                self.points.push(p);
                added += 1;
                continue;
            }
            if let Err(at) = self.points.binary_search_by_key(&p.time, |q| q.time) {
                self.points.insert(at, p);
                added += 1;
            }
        }
        added
    }

    /// Keeps only points for which `keep` holds.
    pub fn retain(&mut self, keep: impl FnMut(&QuoteRecord) -> bool) {
        self.points.retain(keep);
    }
}
