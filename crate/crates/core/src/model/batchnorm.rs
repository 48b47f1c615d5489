//! Batch normalization over the sample axis: for each feature,
//! `O = γ (I - μ) / sqrt(σ² + ε) + β` with μ and σ² the batch mean and
//! population variance in train mode, or the running estimates in eval mode.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNormParams {
    pub gamma: Array1<f64>,
    pub beta_shift: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub epsilon: f64,
    pub momentum: f64,
}

impl BatchNormParams {
    pub fn new(features: usize) -> Self {
        Self {
            gamma: Array1::ones(features),
            beta_shift: Array1::zeros(features),
            running_mean: Array1::zeros(features),
            running_var: Array1::ones(features),
            epsilon: DEFAULT_EPSILON,
            momentum: DEFAULT_MOMENTUM,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.len()
    }

    /// Exponential moving average of the batch statistics held in `cache`.
    /// No-op for eval-mode caches.
    pub fn update_running_stats(&mut self, cache: &BatchNormCache) {
        if let Some((mean, var)) = &cache.batch_stats {
            let m = self.momentum;
            self.running_mean = &self.running_mean * (1.0 - m) + mean * m;
            self.running_var = &self.running_var * (1.0 - m) + var * m;
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    x_hat: Array2<f64>,
    inv_std: Array1<f64>,
    gamma: Array1<f64>,
    /// Batch mean and population variance; `None` in eval mode.
    pub batch_stats: Option<(Array1<f64>, Array1<f64>)>,
}

/// `input` is samples × features.
pub fn batchnorm_forward(
    input: &Array2<f64>,
    params: &BatchNormParams,
    train: bool,
) -> Result<(Array2<f64>, BatchNormCache)> {
    if input.ncols() != params.features() {
        return Err(Error::DimensionMismatch {
            expected: params.features(),
            got: input.ncols(),
        });
    }
    let n = input.nrows();
    let (mean, var, batch_stats) = if train {
        if n < 2 {
            return Err(Error::BatchTooSmall(n));
        }
        let mean = input.sum_axis(Axis(0)) / n as f64;
        let centered = input - &mean;
        let var = (&centered * &centered).sum_axis(Axis(0)) / n as f64;
        (mean.clone(), var.clone(), Some((mean, var)))
    } else {
        (
            params.running_mean.clone(),
            params.running_var.clone(),
            None,
        )
    };
    let inv_std = var.mapv(|v| 1.0 / (v + params.epsilon).sqrt());
    let x_hat = (input - &mean) * &inv_std;
    let out = &x_hat * &params.gamma + &params.beta_shift;
    Ok((
        out,
        BatchNormCache {
            x_hat,
            inv_std,
            gamma: params.gamma.clone(),
            batch_stats,
        },
    ))
}

/// Returns `(grad_input, grad_gamma, grad_beta_shift)`. In train mode the
/// gradient flows through the batch mean and variance as well.
pub fn batchnorm_backward(
    grad_out: &Array2<f64>,
    cache: &BatchNormCache,
) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
    let grad_beta = grad_out.sum_axis(Axis(0));
    let grad_gamma = (grad_out * &cache.x_hat).sum_axis(Axis(0));
    let grad_xhat = grad_out * &cache.gamma;
    let grad_in = if cache.batch_stats.is_some() {
        let n = grad_out.nrows() as f64;
        let sum_g = grad_xhat.sum_axis(Axis(0));
        let sum_gx = (&grad_xhat * &cache.x_hat).sum_axis(Axis(0));
        let mut g = grad_xhat * n - &sum_g - &(&cache.x_hat * &sum_gx);
        g *= &(&cache.inv_std / n);
        g
    } else {
        grad_xhat * &cache.inv_std
    };
    (grad_in, grad_gamma, grad_beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    #[test]
    fn two_value_feature() {
        let p = BatchNormParams::new(1);
        let (out, _) = batchnorm_forward(&array![[1.0], [3.0]], &p, true).unwrap();
        let want = 1.0 / (1.0 + 1e-5f64).sqrt();
        assert!((out[[0, 0]] + want).abs() < 1e-15);
        assert!((out[[1, 0]] - want).abs() < 1e-15);
        assert!((want - 0.9999950).abs() < 1e-7);
    }

    #[test]
    fn constant_column_gives_shift() {
        let mut p = BatchNormParams::new(1);
        p.beta_shift[0] = 0.75;
        p.gamma[0] = 3.0;
        let (out, _) = batchnorm_forward(&array![[2.0], [2.0], [2.0]], &p, true).unwrap();
        assert!(out.iter().all(|&v| v == 0.75));
    }

    #[test]
    fn single_sample_train_is_error() {
        let p = BatchNormParams::new(2);
        assert!(matches!(
            batchnorm_forward(&array![[1.0, 2.0]], &p, true),
            Err(Error::BatchTooSmall(1))
        ));
        assert!(batchnorm_forward(&array![[1.0, 2.0]], &p, false).is_ok());
    }

    #[test]
    fn train_output_moments() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let x = Array2::from_shape_fn((64, 5), |(_, j)| {
            rng.random_range(-1.0..1.0) * (j as f64 * 0.5 + 0.01)
        });
        let p = BatchNormParams::new(5);
        let (out, cache) = batchnorm_forward(&x, &p, true).unwrap();
        let (_, var) = cache.batch_stats.unwrap();
        for j in 0..5 {
            let col = out.column(j);
            let m = col.sum() / 64.0;
            let v = col.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / 64.0;
            assert!(m.abs() < 1e-10);
            assert!((v - var[j] / (var[j] + 1e-5)).abs() < 1e-6);
        }
    }

    #[test]
    fn running_stats_ema() {
        let mut p = BatchNormParams::new(1);
        let (_, cache) = batchnorm_forward(&array![[1.0], [3.0]], &p, true).unwrap();
        p.update_running_stats(&cache);
        assert!((p.running_mean[0] - 0.2).abs() < 1e-15);
        assert!((p.running_var[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn backward_matches_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((6, 3), |_| rng.random_range(-2.0..2.0));
        let w = Array2::from_shape_fn((6, 3), |_| rng.random_range(-1.0..1.0));
        let mut p = BatchNormParams::new(3);
        p.gamma = array![0.5, -1.3, 2.0];
        p.beta_shift = array![0.1, 0.2, -0.3];
        let loss = |x: &Array2<f64>| (batchnorm_forward(x, &p, true).unwrap().0 * &w).sum();
        let (_, cache) = batchnorm_forward(&x, &p, true).unwrap();
        let (gx, gg, gb) = batchnorm_backward(&w, &cache);
        for idx in [(0, 0), (3, 1), (5, 2)] {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[idx] += 1e-6;
            xm[idx] -= 1e-6;
            let fd = (loss(&xp) - loss(&xm)) / 2e-6;
            assert!((fd - gx[idx]).abs() < 1e-7);
        }
        assert_eq!(gb, w.sum_axis(Axis(0)));
        for j in 0..3 {
            assert!(gx.column(j).sum().abs() < 1e-12);
            let (out, _) = batchnorm_forward(&x, &p, true).unwrap();
            let want: f64 = ((&out.column(j) - p.beta_shift[j]) / p.gamma[j] * w.column(j)).sum();
            assert!((gg[j] - want).abs() < 1e-12);
        }
    }
}
