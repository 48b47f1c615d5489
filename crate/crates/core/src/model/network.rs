use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::batchnorm::BatchNormParams;
use super::block::{resblock_backward, resblock_forward, BlockCache, BlockGrads, ResBlockParams};
use super::dense::{glorot, DenseLayerParams};
use super::{Mode, NetworkLayout};
use crate::error::{Error, Result};
use crate::rng::seeded;

/// All learnable tensors plus batch-norm running statistics.
///
/// The flat view used by optimizers orders parameters as: for each block, for
/// each dense layer its weight (row-major) then bias, followed by that
/// layer's batch-norm γ and β; then the block's shortcut weight. The output
/// head weight and bias come last. Running statistics are not part of the
/// flat view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResSurvParams {
    pub layout: NetworkLayout,
    pub blocks: Vec<ResBlockParams>,
    pub output_head: DenseLayerParams,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub(crate) blocks: Vec<BlockCache>,
    head_input: Array2<f64>,
}

/// Glorot-uniform weights (shortcuts included), zero biases, γ = 1, β = 0,
/// running mean 0 and running variance 1.
pub fn init_params(layout: &NetworkLayout, seed: u64) -> Result<ResSurvParams> {
    layout.validate()?;
    let mut rng = seeded(seed);
    let mut blocks = Vec::with_capacity(layout.block_widths.len());
    let mut in_dim = layout.input_dim;
    for &width in &layout.block_widths {
        let mut dense_layers = Vec::with_capacity(layout.layers_per_block);
        let mut batch_norms = Vec::new();
        let mut d = in_dim;
        for _ in 0..layout.layers_per_block {
            dense_layers.push(DenseLayerParams::glorot(width, d, &mut rng));
            if layout.batch_norm {
                batch_norms.push(BatchNormParams::new(width));
            }
            d = width;
        }
        let shortcut = layout.shortcut.then(|| glorot(width, in_dim, &mut rng));
        blocks.push(ResBlockParams {
            dense_layers,
            batch_norms,
            shortcut,
        });
        in_dim = width;
    }
    let output_head = DenseLayerParams::glorot(1, in_dim, &mut rng);
    Ok(ResSurvParams {
        layout: layout.clone(),
        blocks,
        output_head,
    })
}

impl ResSurvParams {
    fn for_each_tensor<'a>(&'a self, mut f: impl FnMut(&'a [f64], bool)) {
        let slice = |a: &'a Array2<f64>| a.as_slice().expect("standard layout");
        let vslice = |a: &'a Array1<f64>| a.as_slice().expect("standard layout");
        for block in &self.blocks {
            for (l, dense) in block.dense_layers.iter().enumerate() {
                f(slice(&dense.weight), true);
                f(vslice(&dense.bias), false);
                if let Some(bn) = block.batch_norms.get(l) {
                    f(vslice(&bn.gamma), false);
                    f(vslice(&bn.beta_shift), false);
                }
            }
            if let Some(ws) = &block.shortcut {
                f(slice(ws), true);
            }
        }
        f(slice(&self.output_head.weight), true);
        f(vslice(&self.output_head.bias), false);
    }

    fn for_each_tensor_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        for block in &mut self.blocks {
            for (l, dense) in block.dense_layers.iter_mut().enumerate() {
                f(dense.weight.as_slice_mut().expect("standard layout"));
                f(dense.bias.as_slice_mut().expect("standard layout"));
                if let Some(bn) = block.batch_norms.get_mut(l) {
                    f(bn.gamma.as_slice_mut().expect("standard layout"));
                    f(bn.beta_shift.as_slice_mut().expect("standard layout"));
                }
            }
            if let Some(ws) = &mut block.shortcut {
                f(ws.as_slice_mut().expect("standard layout"));
            }
        }
        f(self
            .output_head
            .weight
            .as_slice_mut()
            .expect("standard layout"));
        f(self
            .output_head
            .bias
            .as_slice_mut()
            .expect("standard layout"));
    }

    pub fn n_params(&self) -> usize {
        let mut n = 0;
        self.for_each_tensor(|t, _| n += t.len());
        n
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.for_each_tensor(|t, _| out.extend_from_slice(t));
        out
    }

    /// Overwrite all learnable tensors from a flat vector in
    /// [`ResSurvParams::flatten`] order.
    pub fn assign_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "flat parameter length");
        let mut offset = 0;
        self.for_each_tensor_mut(|t| {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        });
    }

    /// `true` for dense, shortcut and head weight entries: the entries that
    /// receive L2 penalty or weight decay. Biases and batch-norm γ/β are
    /// excluded.
    pub fn weight_mask(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.n_params());
        self.for_each_tensor(|t, is_weight| out.extend(std::iter::repeat_n(is_weight, t.len())));
        out
    }

    /// Fold the batch statistics of a train-mode forward pass into the
    /// running estimates.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        for (block, bc) in self.blocks.iter_mut().zip(&cache.blocks) {
            for (bn, c) in block.batch_norms.iter_mut().zip(bc.bn_caches()) {
                bn.update_running_stats(c);
            }
        }
    }

    /// Eval-mode risk scores.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        model_forward(x, self, Mode::Eval).map(|(h, _)| h)
    }
}

pub fn model_forward(
    x: &Array2<f64>,
    params: &ResSurvParams,
    mode: Mode,
) -> Result<(Vec<f64>, ForwardCache)> {
    if x.ncols() != params.layout.input_dim {
        return Err(Error::DimensionMismatch {
            expected: params.layout.input_dim,
            got: x.ncols(),
        });
    }
    let mut a = x.to_owned();
    let mut caches = Vec::with_capacity(params.blocks.len());
    for (b, block) in params.blocks.iter().enumerate() {
        let (y, cache) = resblock_forward(&a, block, b, &params.layout, mode)?;
        caches.push(cache);
        a = y;
    }
    let h = params.output_head.forward(&a).column(0).to_vec();
    Ok((
        h,
        ForwardCache {
            blocks: caches,
            head_input: a,
        },
    ))
}

fn push2(out: &mut Vec<f64>, a: &Array2<f64>) {
    out.extend(a.iter());
}

fn push1(out: &mut Vec<f64>, a: &Array1<f64>) {
    out.extend(a.iter());
}

/// Gradient of a scalar loss with respect to every learnable parameter, in
/// flat-view order, given `grad_h = ∂loss/∂h`.
pub fn model_backward(grad_h: &[f64], params: &ResSurvParams, cache: &ForwardCache) -> Vec<f64> {
    let n = cache.head_input.nrows();
    assert_eq!(grad_h.len(), n, "one gradient entry per sample");
    let g = Array2::from_shape_vec((n, 1), grad_h.to_vec()).expect("column vector");
    let (mut grad_a, head_w, head_b) = params.output_head.backward(&g, &cache.head_input);

    let mut block_grads: Vec<BlockGrads> = Vec::with_capacity(params.blocks.len());
    for (block, bc) in params.blocks.iter().zip(&cache.blocks).rev() {
        let (gx, grads) = resblock_backward(&grad_a, block, bc, &params.layout);
        block_grads.push(grads);
        grad_a = gx;
    }
    block_grads.reverse();

    let mut out = Vec::with_capacity(params.n_params());
    for grads in &block_grads {
        for (l, (gw, gb)) in grads.dense.iter().enumerate() {
            push2(&mut out, gw);
            push1(&mut out, gb);
            if let Some((gg, gbeta)) = grads.batch_norms.get(l) {
                push1(&mut out, gg);
                push1(&mut out, gbeta);
            }
        }
        if let Some(gs) = &grads.shortcut {
            push2(&mut out, gs);
        }
    }
    push2(&mut out, &head_w);
    push1(&mut out, &head_b);
    out
}
