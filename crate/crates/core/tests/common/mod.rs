#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ressurv::cox::RiskSetIndex;
use ressurv::dataset::{generate_synthetic, HazardKind, SyntheticSpec};
use ressurv::train::cox_loss_and_gradient;
use ressurv::{Hyperparameters, Mode, ResSurvParams, SurvivalDataset};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample::<f64, _>(StandardNormal))
}

/// Random survival outcomes with roughly 70% events.
pub fn random_outcomes(n: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<bool>) {
    let times = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
    let mut events: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
    events[0] = true;
    (times, events)
}

pub fn synthetic(
    kind: HazardKind,
    n: usize,
    p: usize,
    beta: &[f64],
    censor: f64,
    seed: u64,
) -> (SurvivalDataset, Vec<f64>) {
    generate_synthetic(&SyntheticSpec {
        n,
        p,
        hazard_kind: kind,
        true_coefficients: beta.to_vec(),
        weibull_shape: 1.5,
        baseline_scale: 0.01,
        target_censor_rate: censor,
        seed,
    })
    .unwrap()
}

pub fn linear_data(n: usize, censor: f64, seed: u64) -> SurvivalDataset {
    synthetic(
        HazardKind::Linear,
        n,
        5,
        &[1.0, -1.0, 0.5, 0.0, 0.0],
        censor,
        seed,
    )
    .0
}

/// Small network that trains in well under a second on a few hundred samples.
pub fn small_hp() -> Hyperparameters {
    Hyperparameters {
        n_blocks: 2,
        dense_layers_per_block: 1,
        nodes: 16,
        learning_rate: 1e-2,
        l2_lambda: 1e-3,
        dropout_rate: 0.0,
        max_epochs: 200,
        ..Hyperparameters::default()
    }
}

/// Largest entrywise relative error `|a - f| / max(|a|, |f|)` between the
/// analytic gradient of (Cox NLL + L2) and central differences with step
/// `step`, over every parameter. Entries where both values are below
/// `floor` in magnitude count as agreeing.
pub fn max_gradient_relative_error(
    params: &ResSurvParams,
    x: &Array2<f64>,
    idx: &RiskSetIndex,
    mode: Mode,
    l2: f64,
    step: f64,
    floor: f64,
) -> f64 {
    let (_, analytic, _) = cox_loss_and_gradient(params, x, idx, mode, l2).unwrap();
    let base = params.flatten();
    let mut probe = params.clone();
    let mut loss_at = |flat: &[f64]| {
        probe.assign_flat(flat);
        cox_loss_and_gradient(&probe, x, idx, mode, l2).unwrap().0
    };
    let mut worst = 0.0f64;
    let mut flat = base.clone();
    for i in 0..base.len() {
        flat[i] = base[i] + step;
        let up = loss_at(&flat);
        flat[i] = base[i] - step;
        let down = loss_at(&flat);
        flat[i] = base[i];
        let fd = (up - down) / (2.0 * step);
        let scale = analytic[i].abs().max(fd.abs());
        if scale < floor {
            continue;
        }
        worst = worst.max((analytic[i] - fd).abs() / scale);
    }
    worst
}
