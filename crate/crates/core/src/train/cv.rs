use rayon::prelude::*;
use serde::Serialize;

use super::hyper::Hyperparameters;
use super::trainer::train;
use crate::dataset::{
    canonical_order, kfold_split, standardize_apply, standardize_fit, stratified_holdout,
    FoldAssignment, StandardizationParams, SurvivalDataset,
};
use crate::error::{Error, Result};
use crate::metrics::concordance_fast;
use crate::rng::derive_seed;

/// Share of each training complement held out for early stopping.
pub const VALIDATION_FRACTION: f64 = 0.2;

/// One fold's splits, standardized with statistics of the training complement.
#[derive(Debug, Clone)]
pub struct FoldData {
    pub fold: usize,
    pub standardization: StandardizationParams,
    /// Whole training complement.
    pub train_full: SurvivalDataset,
    /// Early-stopping split of `train_full`: fitting part and monitor part.
    pub train: SurvivalDataset,
    pub val: SurvivalDataset,
    pub test: SurvivalDataset,
}

/// Build fold `fold`. Sample order inside every split depends only on sample
/// ids, so permuting the rows of `ds` yields identical splits.
pub fn prepare_fold(ds: &SurvivalDataset, folds: &FoldAssignment, fold: usize) -> Result<FoldData> {
    let mut train_idx = folds.train_indices(fold);
    let mut test_idx = folds.test_indices(fold);
    canonical_order(ds, &mut train_idx, folds.seed);
    canonical_order(ds, &mut test_idx, folds.seed);
    let raw_train = ds.subset(&train_idx);
    let standardization = standardize_fit(&raw_train)?;
    let train_full = standardize_apply(&raw_train, &standardization)?;
    let test = standardize_apply(&ds.subset(&test_idx), &standardization)?;
    let (fit_idx, val_idx) = stratified_holdout(&train_full, VALIDATION_FRACTION, folds.seed)?;
    Ok(FoldData {
        fold,
        standardization,
        train: train_full.subset(&fit_idx),
        val: train_full.subset(&val_idx),
        train_full,
        test,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub test_events: usize,
    pub c_index: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub best_val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub fold_hash: String,
    pub folds: Vec<FoldRecord>,
    pub mean_c_index: f64,
    /// Sample standard deviation across folds (0 for a single fold).
    pub std_c_index: f64,
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-fold training seed, so folds do not share an initialization.
pub(crate) fn fold_hp(hp: &Hyperparameters, fold: usize) -> Hyperparameters {
    Hyperparameters {
        seed: derive_seed(hp.seed, &[fold as u64]),
        ..hp.clone()
    }
}

/// Run `f` over folds in parallel (on the ambient rayon pool), returning
/// results in fold order and the lowest-index error if any fold fails.
pub(crate) fn for_each_fold<T: Send>(
    k: usize,
    f: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let results: Vec<Result<T>> = (0..k).into_par_iter().map(&f).collect();
    results
        .into_iter()
        .enumerate()
        .map(|(fold, r)| {
            r.map_err(|e| Error::Fold {
                fold,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Stratified k-fold cross-validation of held-out C-index. Each fold is
/// standardized on its training complement, trained with an early-stopping
/// split carved from that complement, and scored on the held-out fold.
pub fn cross_validate(
    ds: &SurvivalDataset,
    hp: &Hyperparameters,
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    hp.validate()?;
    ds.validate()?;
    let folds = kfold_split(ds, k, seed)?;
    let records = for_each_fold(k, |fold| {
        let data = prepare_fold(ds, &folds, fold)?;
        let report = train(&data.train, &data.val, &fold_hp(hp, fold))?;
        let scores = report.params.predict(data.test.features())?;
        let c = concordance_fast(data.test.times(), data.test.events(), &scores)?;
        Ok(FoldRecord {
            fold,
            n_train: data.train.n_samples(),
            n_val: data.val.n_samples(),
            n_test: data.test.n_samples(),
            test_events: data.test.n_events(),
            c_index: c.c_index,
            best_epoch: report.best_epoch,
            epochs_run: report.epochs_run(),
            stopped_early: report.stopped_early,
            best_val_loss: report.best_val_loss,
        })
    })?;
    let cs: Vec<f64> = records.iter().map(|r| r.c_index).collect();
    let (mean_c_index, std_c_index) = mean_std(&cs);
    Ok(CvReport {
        k,
        seed,
        fold_hash: folds.fingerprint(ds),
        folds: records,
        mean_c_index,
        std_c_index,
    })
}
