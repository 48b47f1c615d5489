//! Inverted dropout with masks drawn from a counter-based stream, so a given
//! `(seed, epoch, layer)` always produces the same mask.

use ndarray::Array2;

use crate::rng::{derive_seed, splitmix64, unit_from_bits};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Identifies one dropout mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DropoutKey {
    pub seed: u64,
    pub epoch: u64,
    pub layer: u64,
}

pub fn dropout_mask(shape: (usize, usize), rate: f64, key: DropoutKey) -> Array2<f64> {
    let base = derive_seed(key.seed, &[key.epoch, key.layer]);
    let keep = 1.0 / (1.0 - rate);
    let cols = shape.1;
    Array2::from_shape_fn(shape, |(i, j)| {
        let counter = (i * cols + j) as u64;
        let u = unit_from_bits(splitmix64(base.wrapping_add(counter.wrapping_mul(GOLDEN))));
        if u < rate {
            0.0
        } else {
            keep
        }
    })
}

/// Returns the output and the mask that produced it (`None` when dropout is
/// inactive: rate zero or eval mode).
pub fn dropout_forward(
    a: &Array2<f64>,
    rate: f64,
    key: Option<DropoutKey>,
) -> (Array2<f64>, Option<Array2<f64>>) {
    assert!(
        (0.0..1.0).contains(&rate),
        "dropout rate must lie in [0, 1)"
    );
    match key {
        Some(key) if rate > 0.0 => {
            let mask = dropout_mask(a.dim(), rate, key);
            (a * &mask, Some(mask))
        }
        _ => (a.clone(), None),
    }
}
