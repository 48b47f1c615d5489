//! Harrell's concordance index.
//!
//! A pair `(i, j)` is comparable when `T_i < T_j` and sample `i` had an
//! observed event. It is concordant when `h_i > h_j` (higher risk, earlier
//! event), discordant when `h_i < h_j`, and a score tie counts one half.
//! Pairs with equal times are never comparable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcordanceResult {
    pub c_index: f64,
    pub concordant: u64,
    pub discordant: u64,
    pub tied_score: u64,
    pub comparable_pairs: u64,
}

impl ConcordanceResult {
    fn from_counts(concordant: u64, discordant: u64, tied_score: u64) -> Result<Self> {
        let comparable_pairs = concordant + discordant + tied_score;
        if comparable_pairs == 0 {
            return Err(Error::NoComparablePairs);
        }
        Ok(Self {
            c_index: (concordant as f64 + 0.5 * tied_score as f64) / comparable_pairs as f64,
            concordant,
            discordant,
            tied_score,
            comparable_pairs,
        })
    }
}

fn check_inputs(times: &[f64], events: &[bool], scores: &[f64]) -> Result<()> {
    for len in [events.len(), scores.len()] {
        if len != times.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: len,
            });
        }
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Config("risk scores must be finite".into()));
    }
    Ok(())
}

/// O(n²) pair enumeration; the reference definition.
pub fn concordance_index(
    times: &[f64],
    events: &[bool],
    scores: &[f64],
) -> Result<ConcordanceResult> {
    check_inputs(times, events, scores)?;
    let (mut conc, mut disc, mut tied) = (0u64, 0u64, 0u64);
    for i in 0..times.len() {
        if !events[i] {
            continue;
        }
        for j in 0..times.len() {
            if times[i] < times[j] {
                if scores[i] > scores[j] {
                    conc += 1;
                } else if scores[i] < scores[j] {
                    disc += 1;
                } else {
                    tied += 1;
                }
            }
        }
    }
    ConcordanceResult::from_counts(conc, disc, tied)
}

/// Fenwick tree of counts over score ranks.
struct Fenwick(Vec<u64>);

impl Fenwick {
    fn new(n: usize) -> Self {
        Self(vec![0; n + 1])
    }

    fn add(&mut self, rank: usize) {
        let mut i = rank + 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted ranks `< rank`.
    fn below(&self, rank: usize) -> u64 {
        let mut i = rank;
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// O(n log n) sweep from the latest time backwards: each event is compared
/// against every sample with a strictly later time, already counted in a
/// Fenwick tree over score ranks. Counts equal [`concordance_index`] exactly.
pub fn concordance_fast(
    times: &[f64],
    events: &[bool],
    scores: &[f64],
) -> Result<ConcordanceResult> {
    check_inputs(times, events, scores)?;
    let n = times.len();

    let mut by_score: Vec<usize> = (0..n).collect();
    by_score.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    let mut rank = vec![0usize; n];
    let mut distinct = 0;
    for (k, &i) in by_score.iter().enumerate() {
        if k > 0 && scores[i] != scores[by_score[k - 1]] {
            distinct += 1;
        }
        rank[i] = distinct;
    }

    let mut by_time: Vec<usize> = (0..n).collect();
    by_time.sort_by(|&a, &b| times[b].total_cmp(&times[a]));

    let mut tree = Fenwick::new(distinct + 1);
    let mut inserted = 0u64;
    let (mut conc, mut disc, mut tied) = (0u64, 0u64, 0u64);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && times[by_time[end]] == times[by_time[start]] {
            end += 1;
        }
        for &i in &by_time[start..end] {
            if events[i] {
                let lower = tree.below(rank[i]);
                let not_higher = tree.below(rank[i] + 1);
                conc += lower;
                tied += not_higher - lower;
                disc += inserted - not_higher;
            }
        }
        for &i in &by_time[start..end] {
            tree.add(rank[i]);
            inserted += 1;
        }
        start = end;
    }
    ConcordanceResult::from_counts(conc, disc, tied)
}
