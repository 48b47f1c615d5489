use serde::Serialize;

use super::cv::{fold_hp, for_each_fold, mean_std, prepare_fold};
use super::hyper::Hyperparameters;
use super::trainer::train;
use crate::cox::fit_linear_cox_newton;
use crate::dataset::{kfold_split, SurvivalDataset};
use crate::error::Result;
use crate::metrics::concordance_fast;

pub const NEWTON_MAX_ITER: usize = 100;
pub const NEWTON_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub model: String,
    pub fold_c_index: Vec<f64>,
    pub mean_c_index: f64,
    pub std_c_index: f64,
}

impl ModelSummary {
    fn new(model: &str, fold_c_index: Vec<f64>) -> Self {
        let (mean_c_index, std_c_index) = mean_std(&fold_c_index);
        Self {
            model: model.to_string(),
            fold_c_index,
            mean_c_index,
            std_c_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub k: usize,
    pub seed: u64,
    pub fold_hash: String,
    /// Residual network, the same network without shortcuts, and the
    /// Newton-Raphson linear Cox model, in that order.
    pub models: Vec<ModelSummary>,
}

impl ComparisonReport {
    pub fn model(&self, name: &str) -> Option<&ModelSummary> {
        self.models.iter().find(|m| m.model == name)
    }
}

pub const RESSURV: &str = "ressurv";
pub const NO_SHORTCUT: &str = "mlp_no_shortcut";
pub const LINEAR_COX: &str = "linear_cox";

/// Held-out C-index of the three models on identical folds. The networks use
/// the same early-stopping split; the linear model is fitted on the whole
/// training complement.
pub fn compare_models(
    ds: &SurvivalDataset,
    hp: &Hyperparameters,
    k: usize,
    seed: u64,
) -> Result<ComparisonReport> {
    hp.validate()?;
    ds.validate()?;
    let folds = kfold_split(ds, k, seed)?;
    let ablation = Hyperparameters {
        shortcut: false,
        ..hp.clone()
    };
    let per_fold = for_each_fold(k, |fold| {
        let data = prepare_fold(ds, &folds, fold)?;
        let held_out = |scores: &[f64]| -> Result<f64> {
            Ok(concordance_fast(data.test.times(), data.test.events(), scores)?.c_index)
        };
        let res = train(&data.train, &data.val, &fold_hp(hp, fold))?;
        let mlp = train(&data.train, &data.val, &fold_hp(&ablation, fold))?;
        let linear = fit_linear_cox_newton(&data.train_full, NEWTON_MAX_ITER, NEWTON_TOL)?;
        Ok([
            held_out(&res.params.predict(data.test.features())?)?,
            held_out(&mlp.params.predict(data.test.features())?)?,
            held_out(&linear.predict(data.test.features()))?,
        ])
    })?;
    let column = |m: usize| per_fold.iter().map(|r| r[m]).collect::<Vec<_>>();
    Ok(ComparisonReport {
        k,
        seed,
        fold_hash: folds.fingerprint(ds),
        models: vec![
            ModelSummary::new(RESSURV, column(0)),
            ModelSummary::new(NO_SHORTCUT, column(1)),
            ModelSummary::new(LINEAR_COX, column(2)),
        ],
    })
}
