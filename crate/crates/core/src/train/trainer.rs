use std::time::{Duration, Instant};

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::Serialize;

use super::hyper::{Hyperparameters, EARLY_STOP_MIN_DELTA, MIN_BATCH_EVENTS};
use super::optim::{decay_learning_rate, optimizer_step, OptimizerState};
use crate::cox::{l2_penalty, neg_log_partial_likelihood, nll_gradient, RiskSetIndex};
use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};
use crate::metrics::concordance_fast;
use crate::model::{init_params, model_backward, model_forward, ForwardCache, Mode, ResSurvParams};
use crate::rng::{derive_seed, seeded};

const DROPOUT_STREAM: u64 = 0xD50;
const SHUFFLE_STREAM: u64 = 0x5F1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Cox NLL plus loss-side L2 on the training split, before this epoch's update.
    pub train_loss: f64,
    /// Cox NLL on the validation split after this epoch's update (eval mode).
    pub val_loss: f64,
    /// `None` when the validation split has no comparable pairs.
    pub val_c_index: Option<f64>,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
    /// Set when AdamW converted `l2_lambda` into decoupled weight decay.
    pub decoupled_weight_decay: Option<f64>,
    pub on_grid: bool,
    /// Parameters restored from the best epoch.
    #[serde(skip)]
    pub params: ResSurvParams,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.epochs.len()
    }

    /// Running minimum of validation loss, one entry per epoch.
    pub fn best_val_trajectory(&self) -> Vec<f64> {
        self.epochs
            .iter()
            .scan(f64::INFINITY, |best, r| {
                *best = best.min(r.val_loss);
                Some(*best)
            })
            .collect()
    }

    pub fn best_record(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch - 1]
    }
}

/// Cox NLL of the network's scores plus `l2_lambda Σ w²`, and the gradient
/// with respect to the flat parameter vector. Train-mode passes with the same
/// `(seed, epoch)` reuse the same dropout masks, which makes this function
/// deterministic and suitable for finite-difference checks.
pub fn cox_loss_and_gradient(
    params: &ResSurvParams,
    x: &Array2<f64>,
    idx: &RiskSetIndex,
    mode: Mode,
    l2_lambda: f64,
) -> Result<(f64, Vec<f64>, ForwardCache)> {
    let (h, cache) = model_forward(x, params, mode)?;
    let nll = neg_log_partial_likelihood(&h, idx);
    let grad_h = nll_gradient(&h, idx);
    let mut grads = model_backward(&grad_h, params, &cache);
    let (penalty, grad_pen) = l2_penalty(&params.flatten(), &params.weight_mask(), l2_lambda);
    for (g, p) in grads.iter_mut().zip(&grad_pen) {
        *g += p;
    }
    Ok((nll + penalty, grads, cache))
}

struct Stepper<'a> {
    hp: &'a Hyperparameters,
    state: OptimizerState,
    mask: Vec<bool>,
    decay: f64,
    dropout_seed: u64,
}

impl Stepper<'_> {
    /// One forward/backward/update on `x`; returns the pre-update loss.
    fn step(
        &mut self,
        params: &mut ResSurvParams,
        x: &Array2<f64>,
        idx: &RiskSetIndex,
        key: u64,
    ) -> Result<f64> {
        let mode = Mode::Train {
            seed: self.dropout_seed,
            epoch: key,
        };
        let (loss, grads, cache) = cox_loss_and_gradient(params, x, idx, mode, self.hp.loss_l2())?;
        if loss.is_finite() {
            params.update_running_stats(&cache);
            let mut flat = params.flatten();
            optimizer_step(&mut flat, &grads, &mut self.state, self.decay, &self.mask);
            params.assign_flat(&flat);
        }
        Ok(loss)
    }
}

fn mini_batch_epoch(
    stepper: &mut Stepper,
    params: &mut ResSurvParams,
    ds: &SurvivalDataset,
    batch_size: usize,
    epoch: usize,
) -> Result<f64> {
    let mut order: Vec<usize> = (0..ds.n_samples()).collect();
    order.shuffle(&mut seeded(derive_seed(
        stepper.hp.seed,
        &[SHUFFLE_STREAM, epoch as u64],
    )));
    let (mut total, mut used) = (0.0, 0usize);
    for (b, chunk) in order.chunks(batch_size).enumerate() {
        let events: Vec<bool> = chunk.iter().map(|&i| ds.events()[i]).collect();
        if chunk.len() < 2 || events.iter().filter(|&&e| e).count() < MIN_BATCH_EVENTS {
            continue;
        }
        let times: Vec<f64> = chunk.iter().map(|&i| ds.times()[i]).collect();
        let idx = RiskSetIndex::build(&times, &events)?;
        let x = ds.features().select(Axis(0), chunk);
        let loss = stepper.step(params, &x, &idx, ((epoch as u64) << 20) | b as u64)?;
        if !loss.is_finite() {
            return Ok(loss);
        }
        total += loss;
        used += 1;
    }
    if used == 0 {
        return Err(Error::Config(format!(
            "no mini-batch of {batch_size} samples holds {MIN_BATCH_EVENTS} events"
        )));
    }
    Ok(total / used as f64)
}

/// Train a fresh network on `train_ds`, monitoring Cox NLL on `val_ds` for
/// early stopping. Both splits must already be standardized.
///
/// Each epoch is one optimizer step on the full training split (unless
/// `hp.batch_size` is set). Training stops after `hp.patience` consecutive
/// epochs without a validation improvement of at least
/// [`EARLY_STOP_MIN_DELTA`], and the parameters from the lowest-validation
/// epoch are restored.
pub fn train(
    train_ds: &SurvivalDataset,
    val_ds: &SurvivalDataset,
    hp: &Hyperparameters,
) -> Result<TrainReport> {
    let started = Instant::now();
    hp.validate()?;
    train_ds.validate()?;
    val_ds.validate()?;
    if val_ds.n_features() != train_ds.n_features() {
        return Err(Error::DimensionMismatch {
            expected: train_ds.n_features(),
            got: val_ds.n_features(),
        });
    }
    let train_idx = RiskSetIndex::from_dataset(train_ds)?;
    let val_idx = RiskSetIndex::from_dataset(val_ds)?;

    let mut params = init_params(&hp.layout(train_ds.n_features()), hp.seed)?;
    let mut stepper = Stepper {
        hp,
        state: OptimizerState::new(hp.optimizer, params.n_params(), hp.learning_rate),
        mask: params.weight_mask(),
        decay: hp.decoupled_decay().unwrap_or(0.0),
        dropout_seed: derive_seed(hp.seed, &[DROPOUT_STREAM]),
    };

    let mut epochs = Vec::new();
    let mut best = (f64::INFINITY, 0usize, params.clone());
    let mut reference = f64::INFINITY;
    let mut waited = 0;
    let mut stopped_early = false;

    for epoch in 1..=hp.max_epochs {
        let learning_rate = stepper.state.lr;
        let train_loss = match hp.batch_size {
            None => stepper.step(&mut params, train_ds.features(), &train_idx, epoch as u64)?,
            Some(b) => mini_batch_epoch(&mut stepper, &mut params, train_ds, b, epoch)?,
        };
        if !train_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: train_loss,
            });
        }
        decay_learning_rate(&mut stepper.state, hp, epoch);

        let h = params.predict(val_ds.features())?;
        let val_loss = neg_log_partial_likelihood(&h, &val_idx);
        if !val_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: val_loss,
            });
        }
        let val_c_index = concordance_fast(val_ds.times(), val_ds.events(), &h)
            .ok()
            .map(|r| r.c_index);
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_c_index,
            learning_rate,
        });

        if val_loss < best.0 {
            best = (val_loss, epoch, params.clone());
        }
        if val_loss < reference - EARLY_STOP_MIN_DELTA {
            reference = val_loss;
            waited = 0;
        } else {
            waited += 1;
            if waited >= hp.patience {
                stopped_early = epoch < hp.max_epochs;
                break;
            }
        }
    }

    let (best_val_loss, best_epoch, params) = best;
    Ok(TrainReport {
        epochs,
        best_epoch,
        best_val_loss,
        stopped_early,
        decoupled_weight_decay: hp.decoupled_decay(),
        on_grid: hp.on_grid(),
        params,
        wall_time: started.elapsed(),
    })
}
