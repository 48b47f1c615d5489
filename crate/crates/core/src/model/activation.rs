use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;
pub const SELU_SCALE: f64 = 1.050_700_987_355_480_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Tanh,
    Selu,
    Relu,
    /// No nonlinearity. Not part of the search grid; used to check the
    /// network against plain matrix products.
    Identity,
}

impl ActivationKind {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            ActivationKind::Tanh => z.tanh(),
            ActivationKind::Selu => {
                if z > 0.0 {
                    SELU_SCALE * z
                } else {
                    SELU_SCALE * SELU_ALPHA * z.exp_m1()
                }
            }
            ActivationKind::Relu => z.max(0.0),
            ActivationKind::Identity => z,
        }
    }

    /// Derivative at input `z`, given `a = apply(z)`.
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            ActivationKind::Tanh => 1.0 - a * a,
            ActivationKind::Selu => {
                if z > 0.0 {
                    SELU_SCALE
                } else {
                    a + SELU_SCALE * SELU_ALPHA
                }
            }
            ActivationKind::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Identity => 1.0,
        }
    }
}

pub fn activation_forward(z: &Array2<f64>, kind: ActivationKind) -> Array2<f64> {
    z.mapv(|v| kind.apply(v))
}

/// `grad ⊙ f'(z)` where `a = f(z)` is the cached forward output.
pub fn activation_backward(
    grad: &Array2<f64>,
    z: &Array2<f64>,
    a: &Array2<f64>,
    kind: ActivationKind,
) -> Array2<f64> {
    let mut out = grad.clone();
    Zip::from(&mut out)
        .and(z)
        .and(a)
        .for_each(|g, &z, &a| *g *= kind.derivative(z, a));
    out
}
