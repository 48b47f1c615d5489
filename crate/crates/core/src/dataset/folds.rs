use serde::{Deserialize, Serialize};

use super::SurvivalDataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, fnv1a};

const FOLD_STREAM: u64 = 0xF01D;
const HOLDOUT_STREAM: u64 = 0x4011;
const CANONICAL_STREAM: u64 = 0xCA7;

/// Fold index per sample. Fold membership is keyed on sample ids, so
/// reordering the rows of a dataset does not change which fold a sample
/// lands in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_of_sample: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldAssignment {
    /// Held-out indices of fold `f`, ascending.
    pub fn test_indices(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of_sample.len())
            .filter(|&i| self.fold_of_sample[i] == f)
            .collect()
    }

    /// Training complement of fold `f`, ascending.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of_sample.len())
            .filter(|&i| self.fold_of_sample[i] != f)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of_sample {
            sizes[f] += 1;
        }
        sizes
    }

    /// Order-independent fingerprint of (sample id, fold) pairs, as 16 hex digits.
    pub fn fingerprint(&self, ds: &SurvivalDataset) -> String {
        let mut pairs: Vec<(&str, usize)> = ds
            .sample_ids()
            .iter()
            .map(String::as_str)
            .zip(self.fold_of_sample.iter().copied())
            .collect();
        pairs.sort();
        let mut bytes = Vec::new();
        for (id, f) in pairs {
            bytes.extend_from_slice(id.as_bytes());
            bytes.push(0);
            bytes.extend_from_slice(&(f as u64).to_le_bytes());
        }
        format!("{:016x}", fnv1a(&bytes))
    }
}

pub(crate) fn sample_key(seed: u64, stream: u64, id: &str) -> u64 {
    derive_seed(seed, &[stream, fnv1a(id.as_bytes())])
}

/// Sort `indices` into an order that depends only on the sample ids and
/// `seed`, not on row positions.
pub(crate) fn canonical_order(ds: &SurvivalDataset, indices: &mut [usize], seed: u64) {
    let ids = ds.sample_ids();
    indices.sort_by(|&a, &b| {
        let ka = (sample_key(seed, CANONICAL_STREAM, &ids[a]), &ids[a], a);
        let kb = (sample_key(seed, CANONICAL_STREAM, &ids[b]), &ids[b], b);
        ka.cmp(&kb)
    });
}

/// Events first, then censored samples, each stratum in pseudo-random order
/// determined by `(seed, stream, id)`.
fn stratified_order(
    ds: &SurvivalDataset,
    indices: &[usize],
    seed: u64,
    stream: u64,
) -> (Vec<usize>, Vec<usize>) {
    let keyed = |want: bool| {
        let mut v: Vec<(u64, &str, usize)> = indices
            .iter()
            .filter(|&&i| ds.events()[i] == want)
            .map(|&i| {
                (
                    sample_key(seed, stream, &ds.sample_ids()[i]),
                    ds.sample_ids()[i].as_str(),
                    i,
                )
            })
            .collect();
        v.sort();
        v.into_iter().map(|(_, _, i)| i).collect::<Vec<_>>()
    };
    (keyed(true), keyed(false))
}

/// Stratified k-fold assignment: events and censored samples are each dealt
/// round-robin across folds, so fold sizes and per-fold event counts both
/// differ by at most one.
pub fn kfold_split(ds: &SurvivalDataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    let n = ds.n_samples();
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    if n < k {
        return Err(Error::Config(format!(
            "cannot split {n} samples into {k} folds"
        )));
    }
    let all: Vec<usize> = (0..n).collect();
    let (events, censored) = stratified_order(ds, &all, seed, FOLD_STREAM);
    let mut fold_of_sample = vec![0; n];
    for (pos, &i) in events.iter().chain(censored.iter()).enumerate() {
        fold_of_sample[i] = pos % k;
    }
    let total_events = events.len();
    let mut fold_events = vec![0; k];
    for &i in &events {
        fold_events[fold_of_sample[i]] += 1;
    }
    if let Some(f) = fold_events.iter().position(|&e| e == total_events) {
        return Err(Error::Stratification(format!(
            "training complement of fold {f} has no events ({total_events} events in total)"
        )));
    }
    Ok(FoldAssignment {
        fold_of_sample,
        k,
        seed,
    })
}

/// Stratified train/validation split of `ds`. Returns ascending
/// `(train, validation)` index lists. Both sides receive at least one event
/// and at least two samples.
pub fn stratified_holdout(
    ds: &SurvivalDataset,
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Config(format!(
            "validation fraction must lie in (0, 1), got {val_fraction}"
        )));
    }
    let all: Vec<usize> = (0..ds.n_samples()).collect();
    let (events, censored) = stratified_order(ds, &all, seed, HOLDOUT_STREAM);
    if events.len() < 2 {
        return Err(Error::Stratification(format!(
            "a holdout split needs at least 2 events, have {}",
            events.len()
        )));
    }
    let (n_events, n_censored) = (events.len(), censored.len());
    let mut n_val_events =
        ((n_events as f64 * val_fraction).round() as usize).clamp(1, n_events - 1);
    let mut n_val_censored = (n_censored as f64 * val_fraction).round() as usize;
    // Each side needs two samples for batch statistics; top up the
    // validation side from censored samples first, then events.
    let n = n_events + n_censored;
    while n_val_events + n_val_censored < 2 && n - n_val_events - n_val_censored > 2 {
        if n_val_censored < n_censored {
            n_val_censored += 1;
        } else if n_val_events + 1 < n_events {
            n_val_events += 1;
        } else {
            break;
        }
    }
    while n - n_val_events - n_val_censored < 2 && n_val_events + n_val_censored > 2 {
        if n_val_censored > 0 {
            n_val_censored -= 1;
        } else {
            n_val_events -= 1;
        }
    }
    if n_val_events + n_val_censored < 2 || n - n_val_events - n_val_censored < 2 {
        return Err(Error::Stratification(format!(
            "a holdout split needs at least 2 samples per side, have {n} in total"
        )));
    }
    let mut val: Vec<usize> = events[..n_val_events]
        .iter()
        .chain(&censored[..n_val_censored])
        .copied()
        .collect();
    let mut train: Vec<usize> = events[n_val_events..]
        .iter()
        .chain(&censored[n_val_censored..])
        .copied()
        .collect();
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}
