use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::ops::Bound;

/// Total order over non-NaN scores. `-0.0` and `0.0` compare equal.
#[derive(Debug, Clone, Copy)]
struct Score(f64);

impl PartialEq for Score {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Score {}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Score {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.partial_cmp(&other.0).expect("scores are never NaN")
    }
}

/// One end of a score interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreBound {
    pub value: f64,
    pub exclusive: bool,
}

impl ScoreBound {
    pub fn inclusive(value: f64) -> Self {
        ScoreBound { value, exclusive: false }
    }

    pub fn exclusive(value: f64) -> Self {
        ScoreBound { value, exclusive: true }
    }

    fn admits_from_below(&self, score: f64) -> bool {
        if self.exclusive {
            score > self.value
        } else {
            score >= self.value
        }
    }

    fn admits_from_above(&self, score: f64) -> bool {
        if self.exclusive {
            score < self.value
        } else {
            score <= self.value
        }
    }
}

/// Members with float scores, iterated by ascending score and then by
/// member bytes.
#[derive(Debug, Clone, Default)]
pub struct SortedSet {
    scores: HashMap<Vec<u8>, f64>,
    order: BTreeSet<(Score, Vec<u8>)>,
}

impl SortedSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn score(&self, member: &[u8]) -> Option<f64> {
        self.scores.get(member).copied()
    }

    /// Inserts or re-scores `member`. Returns true when it was not present.
    pub fn insert(&mut self, member: &[u8], score: f64) -> bool {
        assert!(!score.is_nan(), "NaN score");
        match self.scores.insert(member.to_vec(), score) {
            Some(old) => {
                self.order.remove(&(Score(old), member.to_vec()));
                self.order.insert((Score(score), member.to_vec()));
                false
            }
            None => {
                self.order.insert((Score(score), member.to_vec()));
                true
            }
        }
    }

    pub fn remove(&mut self, member: &[u8]) -> bool {
        match self.scores.remove(member) {
            Some(old) => {
                self.order.remove(&(Score(old), member.to_vec()));
                true
            }
            None => false,
        }
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (&[u8], f64)> + '_ {
        self.order.iter().map(|(s, m)| (m.as_slice(), s.0))
    }

    /// Resolves a signed inclusive rank window against the current length;
    /// negative ranks count from the end. `None` when the window is empty.
    pub fn rank_window(&self, start: i64, stop: i64) -> Option<(usize, usize)> {
        let len = self.len() as i64;
        let mut start = if start < 0 { len + start } else { start };
        let mut stop = if stop < 0 { len + stop } else { stop };
        start = start.max(0);
        if start > stop || start >= len {
            return None;
        }
        stop = stop.min(len - 1);
        Some((start as usize, stop as usize))
    }

    pub fn range_by_rank(&self, start: i64, stop: i64) -> Vec<(&[u8], f64)> {
        match self.rank_window(start, stop) {
            Some((lo, hi)) => self.iter().skip(lo).take(hi - lo + 1).collect(),
            None => Vec::new(),
        }
    }

    fn keys_in_score_range(&self, min: ScoreBound, max: ScoreBound) -> Vec<(Score, Vec<u8>)> {
        if min.value > max.value {
            return Vec::new();
        }
        let lower = (Score(min.value), Vec::new());
        self.order
            .range((Bound::Included(lower), Bound::Unbounded))
            .take_while(|(s, _)| max.admits_from_above(s.0))
            .filter(|(s, _)| min.admits_from_below(s.0))
            .cloned()
            .collect()
    }

    pub fn count_by_score(&self, min: ScoreBound, max: ScoreBound) -> usize {
        self.keys_in_score_range(min, max).len()
    }

    pub fn remove_range_by_score(&mut self, min: ScoreBound, max: ScoreBound) -> usize {
        let doomed = self.keys_in_score_range(min, max);
        for key in &doomed {
            self.order.remove(key);
            self.scores.remove(&key.1);
        }
        doomed.len()
    }

    pub fn remove_range_by_rank(&mut self, start: i64, stop: i64) -> usize {
        let Some((lo, hi)) = self.rank_window(start, stop) else {
            return 0;
        };
        let doomed: Vec<_> = self.order.iter().skip(lo).take(hi - lo + 1).cloned().collect();
        for key in &doomed {
            self.order.remove(key);
            self.scores.remove(&key.1);
        }
        doomed.len()
    }
}
