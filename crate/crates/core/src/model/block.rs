//! Residual block: `y = F(x) + W_s x`, where the main channel `F` repeats
//! `[dense → batch norm → activation → dropout]` once per dense layer and the
//! shortcut `W_s` is a bias-free learned linear map.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::activation::{activation_backward, activation_forward};
use super::batchnorm::{batchnorm_backward, batchnorm_forward, BatchNormCache, BatchNormParams};
use super::dense::DenseLayerParams;
use super::dropout::{dropout_forward, DropoutKey};
use super::{Mode, NetworkLayout};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResBlockParams {
    pub dense_layers: Vec<DenseLayerParams>,
    /// One per dense layer, or empty when the layout disables batch norm.
    pub batch_norms: Vec<BatchNormParams>,
    /// `W_s`, output × input. `None` for the no-shortcut ablation.
    pub shortcut: Option<Array2<f64>>,
}

impl ResBlockParams {
    pub fn in_dim(&self) -> usize {
        self.dense_layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.dense_layers
            .last()
            .expect("block has layers")
            .out_dim()
    }
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Array2<f64>,
    bn: Option<BatchNormCache>,
    pre_activation: Array2<f64>,
    activated: Array2<f64>,
    mask: Option<Array2<f64>>,
}

#[derive(Debug, Clone)]
pub struct BlockCache {
    input: Array2<f64>,
    layers: Vec<LayerCache>,
}

impl BlockCache {
    pub(crate) fn bn_caches(&self) -> impl Iterator<Item = &BatchNormCache> {
        self.layers.iter().filter_map(|l| l.bn.as_ref())
    }
}

/// Per-parameter gradients of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrads {
    pub dense: Vec<(Array2<f64>, Array1<f64>)>,
    /// `(grad_gamma, grad_beta_shift)` per batch-norm layer.
    pub batch_norms: Vec<(Array1<f64>, Array1<f64>)>,
    pub shortcut: Option<Array2<f64>>,
}

/// Dropout masks of block `block` use layer ids `block * LAYER_STRIDE + l`.
pub(crate) const LAYER_STRIDE: u64 = 1024;

fn main_channel_forward(
    x: &Array2<f64>,
    block: &ResBlockParams,
    block_index: usize,
    layout: &NetworkLayout,
    mode: Mode,
) -> Result<(Array2<f64>, Vec<LayerCache>)> {
    let mut a = x.clone();
    let mut caches = Vec::with_capacity(block.dense_layers.len());
    for (l, dense) in block.dense_layers.iter().enumerate() {
        if a.ncols() != dense.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: dense.in_dim(),
                got: a.ncols(),
            });
        }
        let z = dense.forward(&a);
        let (u, bn) = match block.batch_norms.get(l) {
            Some(p) => {
                let (u, c) = batchnorm_forward(&z, p, mode.is_train())?;
                (u, Some(c))
            }
            None => (z, None),
        };
        let act = activation_forward(&u, layout.activation);
        let key = match mode {
            Mode::Train { seed, epoch } => Some(DropoutKey {
                seed,
                epoch,
                layer: block_index as u64 * LAYER_STRIDE + l as u64,
            }),
            Mode::Eval => None,
        };
        let (out, mask) = dropout_forward(&act, layout.dropout_rate, key);
        caches.push(LayerCache {
            input: a,
            bn,
            pre_activation: u,
            activated: act,
            mask,
        });
        a = out;
    }
    Ok((a, caches))
}

/// The main channel `F(x)` alone.
pub fn main_channel(
    x: &Array2<f64>,
    block: &ResBlockParams,
    block_index: usize,
    layout: &NetworkLayout,
    mode: Mode,
) -> Result<Array2<f64>> {
    main_channel_forward(x, block, block_index, layout, mode).map(|(f, _)| f)
}

pub fn resblock_forward(
    x: &Array2<f64>,
    block: &ResBlockParams,
    block_index: usize,
    layout: &NetworkLayout,
    mode: Mode,
) -> Result<(Array2<f64>, BlockCache)> {
    let (mut y, layers) = main_channel_forward(x, block, block_index, layout, mode)?;
    if let Some(ws) = &block.shortcut {
        y += &x.dot(&ws.t());
    }
    Ok((
        y,
        BlockCache {
            input: x.clone(),
            layers,
        },
    ))
}

/// Main-channel backward pass only; returns `(grad_x, grads)` with no
/// shortcut contribution.
pub fn main_channel_backward(
    grad_y: &Array2<f64>,
    block: &ResBlockParams,
    cache: &BlockCache,
    layout: &NetworkLayout,
) -> (Array2<f64>, BlockGrads) {
    let n_layers = block.dense_layers.len();
    let mut dense = Vec::with_capacity(n_layers);
    let mut bns = Vec::with_capacity(block.batch_norms.len());
    let mut g = grad_y.clone();
    for l in (0..n_layers).rev() {
        let lc = &cache.layers[l];
        if let Some(mask) = &lc.mask {
            g *= mask;
        }
        g = activation_backward(&g, &lc.pre_activation, &lc.activated, layout.activation);
        if let Some(bn) = &lc.bn {
            let (gi, gg, gb) = batchnorm_backward(&g, bn);
            bns.push((gg, gb));
            g = gi;
        }
        let (gx, gw, gb) = block.dense_layers[l].backward(&g, &lc.input);
        dense.push((gw, gb));
        g = gx;
    }
    dense.reverse();
    bns.reverse();
    (
        g,
        BlockGrads {
            dense,
            batch_norms: bns,
            shortcut: None,
        },
    )
}

/// `grad_x = F'(x)ᵀ grad_y + W_sᵀ grad_y`; the shortcut weight gradient is
/// `grad_yᵀ x`.
pub fn resblock_backward(
    grad_y: &Array2<f64>,
    block: &ResBlockParams,
    cache: &BlockCache,
    layout: &NetworkLayout,
) -> (Array2<f64>, BlockGrads) {
    let (mut grad_x, mut grads) = main_channel_backward(grad_y, block, cache, layout);
    if let Some(ws) = &block.shortcut {
        grad_x += &grad_y.dot(ws);
        grads.shortcut = Some(grad_y.t().dot(&cache.input));
    }
    (grad_x, grads)
}
