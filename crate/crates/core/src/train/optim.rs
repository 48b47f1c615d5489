//! SGD, Adam and AdamW over flat parameter vectors, plus inverse-time
//! learning-rate decay.

use serde::{Deserialize, Serialize};

use super::hyper::{Hyperparameters, OptimizerKind};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub lr: f64,
    /// Steps taken so far.
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, n_params: usize, lr: f64) -> Self {
        let moments = if kind == OptimizerKind::Sgd {
            0
        } else {
            n_params
        };
        Self {
            kind,
            lr,
            t: 0,
            m: vec![0.0; moments],
            v: vec![0.0; moments],
        }
    }
}

pub fn sgd_step(params: &mut [f64], grads: &[f64], state: &mut OptimizerState) {
    assert_eq!(params.len(), grads.len());
    state.t += 1;
    for (w, g) in params.iter_mut().zip(grads) {
        *w -= state.lr * g;
    }
}

pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut OptimizerState) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(
        params.len(),
        state.m.len(),
        "moment buffers match parameters"
    );
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= state.lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
    }
}

/// Decoupled decay `w ← w - lr·wd·w` on the entries selected by `decay_mask`,
/// then a plain Adam step.
pub fn adamw_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut OptimizerState,
    weight_decay: f64,
    decay_mask: &[bool],
) {
    assert_eq!(params.len(), decay_mask.len());
    let shrink = state.lr * weight_decay;
    for (w, &sel) in params.iter_mut().zip(decay_mask) {
        if sel {
            *w -= shrink * *w;
        }
    }
    adam_step(params, grads, state);
}

/// Dispatch on `state.kind`. `weight_decay` is used only by AdamW.
pub fn optimizer_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut OptimizerState,
    weight_decay: f64,
    decay_mask: &[bool],
) {
    match state.kind {
        OptimizerKind::Sgd => sgd_step(params, grads, state),
        OptimizerKind::Adam => adam_step(params, grads, state),
        OptimizerKind::Adamw => adamw_step(params, grads, state, weight_decay, decay_mask),
    }
}

/// `lr(epoch) = learning_rate / (1 + lr_decay · epoch)`.
pub fn decay_learning_rate(state: &mut OptimizerState, hp: &Hyperparameters, epoch: usize) {
    state.lr = hp.learning_rate / (1.0 + hp.lr_decay * epoch as f64);
}
