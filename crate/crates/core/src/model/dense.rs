use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// `y = x Wᵀ + b` on a samples × features batch; `weight` is out × in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayerParams {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Glorot uniform on `(-L, L)` with `L = sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot(out_dim: usize, in_dim: usize, rng: &mut impl Rng) -> Array2<f64> {
    let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
    Array2::from_shape_fn((out_dim, in_dim), |_| rng.random_range(-limit..limit))
}

impl DenseLayerParams {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            weight: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
        }
    }

    pub(crate) fn glorot(out_dim: usize, in_dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: glorot(out_dim, in_dim, rng),
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }

    /// Returns `(grad_x, grad_weight, grad_bias)`.
    pub fn backward(
        &self,
        grad_y: &Array2<f64>,
        x: &Array2<f64>,
    ) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
        (
            grad_y.dot(&self.weight),
            grad_y.t().dot(x),
            grad_y.sum_axis(Axis(0)),
        )
    }
}
