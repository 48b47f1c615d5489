//! Censored survival datasets: ingestion, filtering, standardization,
//! fold assignment and synthetic generation.

mod csv;
mod folds;
mod synthetic;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::csv::{load_csv, write_csv, CsvSchema};
pub(crate) use folds::canonical_order;
pub use folds::{kfold_split, stratified_holdout, FoldAssignment};
pub use synthetic::{generate_synthetic, HazardKind, SyntheticSpec};

/// Feature matrix (samples in rows) with per-sample survival time and event
/// indicator. `events[i] == true` means the death was observed; `false`
/// means the sample was censored at `times[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    sample_ids: Vec<String>,
    features: Array2<f64>,
    feature_names: Vec<String>,
    times: Vec<f64>,
    events: Vec<bool>,
}

impl SurvivalDataset {
    /// Build a dataset, checking only that shapes agree. Times may still be
    /// invalid here (NaN marks a missing time); see [`filter_patients`] and
    /// [`SurvivalDataset::validate`].
    pub fn new(
        sample_ids: Vec<String>,
        features: Array2<f64>,
        feature_names: Vec<String>,
        times: Vec<f64>,
        events: Vec<bool>,
    ) -> Result<Self> {
        let n = features.nrows();
        for len in [sample_ids.len(), times.len(), events.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::DimensionMismatch {
                expected: features.ncols(),
                got: feature_names.len(),
            });
        }
        Ok(Self {
            sample_ids,
            features,
            feature_names,
            times,
            events,
        })
    }

    /// Dataset with generated ids (`s0`, `s1`, ...) and feature names (`x0`, ...).
    pub fn from_parts(features: Array2<f64>, times: Vec<f64>, events: Vec<bool>) -> Result<Self> {
        let ids = (0..features.nrows()).map(|i| format!("s{i}")).collect();
        let names = (0..features.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(ids, features, names, times, events)
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    /// Check the invariants required before training: at least two samples,
    /// at least one event, strictly positive finite times, finite features.
    pub fn validate(&self) -> Result<()> {
        if self.n_samples() < 2 {
            return Err(Error::UnusableDataset(format!(
                "need at least 2 samples, have {}",
                self.n_samples()
            )));
        }
        if self.n_events() == 0 {
            return Err(Error::UnusableDataset("no observed events".into()));
        }
        if let Some(i) = self.times.iter().position(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::UnusableDataset(format!(
                "sample `{}` has time {}, expected strictly positive and finite",
                self.sample_ids[i], self.times[i]
            )));
        }
        if let Some(((i, j), _)) = self.features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::UnusableDataset(format!(
                "sample `{}` has a non-finite value for feature `{}`",
                self.sample_ids[i], self.feature_names[j]
            )));
        }
        Ok(())
    }

    /// Rows `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> SurvivalDataset {
        SurvivalDataset {
            sample_ids: indices
                .iter()
                .map(|&i| self.sample_ids[i].clone())
                .collect(),
            features: self.features.select(Axis(0), indices),
            feature_names: self.feature_names.clone(),
            times: indices.iter().map(|&i| self.times[i]).collect(),
            events: indices.iter().map(|&i| self.events[i]).collect(),
        }
    }

    /// Same samples with a replaced feature matrix (row count must match).
    pub fn with_features(&self, features: Array2<f64>, feature_names: Vec<String>) -> Result<Self> {
        Self::new(
            self.sample_ids.clone(),
            features,
            feature_names,
            self.times.clone(),
            self.events.clone(),
        )
    }
}

/// Drop samples whose time is nonpositive, non-finite or missing (NaN),
/// keeping relative order. Returns the filtered dataset and the number of
/// samples removed.
pub fn filter_patients(ds: &SurvivalDataset) -> Result<(SurvivalDataset, usize)> {
    let keep: Vec<usize> = (0..ds.n_samples())
        .filter(|&i| ds.times[i].is_finite() && ds.times[i] > 0.0)
        .collect();
    let removed = ds.n_samples() - keep.len();
    let out = if removed == 0 {
        ds.clone()
    } else {
        ds.subset(&keep)
    };
    if out.n_events() == 0 {
        return Err(Error::UnusableDataset(
            "no events remain after patient filtering".into(),
        ));
    }
    Ok((out, removed))
}

/// Population variance (divide by n) of each column; NaN for columns that
/// contain a non-finite value.
pub fn column_variances(features: &Array2<f64>) -> Vec<f64> {
    let n = features.nrows() as f64;
    features
        .columns()
        .into_iter()
        .map(|col| {
            if col.iter().any(|v| !v.is_finite()) {
                return f64::NAN;
            }
            let mean = col.sum() / n;
            col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
        })
        .collect()
}

/// Keep features whose population variance exceeds `min_variance`; columns
/// with any non-finite value are dropped as well.
pub fn filter_features(ds: &SurvivalDataset, min_variance: f64) -> Result<SurvivalDataset> {
    if !(min_variance >= 0.0) {
        return Err(Error::Config(format!(
            "min_variance must be nonnegative, got {min_variance}"
        )));
    }
    let keep: Vec<usize> = column_variances(&ds.features)
        .into_iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite() && *v > min_variance)
        .map(|(j, _)| j)
        .collect();
    if keep.is_empty() {
        return Err(Error::UnusableDataset(
            "no features retained after variance filtering".into(),
        ));
    }
    let names = keep.iter().map(|&j| ds.feature_names[j].clone()).collect();
    ds.with_features(ds.features.select(Axis(1), &keep), names)
}

/// Per-feature mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
}

impl StandardizationParams {
    /// Means 0, stddevs 1.
    pub fn identity(p: usize) -> Self {
        Self {
            means: vec![0.0; p],
            stddevs: vec![1.0; p],
        }
    }

    pub fn apply_matrix(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                got: features.ncols(),
            });
        }
        let mut out = features.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.means[j], self.stddevs[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }
}

pub fn standardize_fit(ds: &SurvivalDataset) -> Result<StandardizationParams> {
    let n = ds.n_samples() as f64;
    let mut means = Vec::with_capacity(ds.n_features());
    let mut stddevs = Vec::with_capacity(ds.n_features());
    for (j, col) in ds.features.columns().into_iter().enumerate() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(Error::ZeroVariance {
                feature: ds.feature_names[j].clone(),
            });
        }
        means.push(mean);
        stddevs.push(sd);
    }
    Ok(StandardizationParams { means, stddevs })
}

pub fn standardize_apply(
    ds: &SurvivalDataset,
    params: &StandardizationParams,
) -> Result<SurvivalDataset> {
    let features = params.apply_matrix(&ds.features)?;
    ds.with_features(features, ds.feature_names.clone())
}
