//! The residual survival network and its manual backward pass.
//!
//! Batches are samples × features matrices. The network is a sequence of
//! residual blocks followed by a linear head producing one unbounded risk
//! score per sample.

pub mod activation;
pub mod batchnorm;
pub mod block;
pub mod checkpoint;
pub mod dense;
pub mod dropout;
mod network;

use serde::{Deserialize, Serialize};

pub use activation::{activation_backward, activation_forward, ActivationKind};
pub use batchnorm::{batchnorm_backward, batchnorm_forward, BatchNormCache, BatchNormParams};
pub use block::{
    main_channel, main_channel_backward, resblock_backward, resblock_forward, BlockCache,
    BlockGrads, ResBlockParams,
};
pub use checkpoint::Checkpoint;
pub use dense::DenseLayerParams;
pub use dropout::{dropout_forward, DropoutKey};
pub use network::{init_params, model_backward, model_forward, ForwardCache, ResSurvParams};

use crate::error::{Error, Result};

/// Whether batch norm uses batch statistics and dropout is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics, dropout masks keyed by `(seed, epoch, layer)`.
    /// Repeating a forward pass with the same key reuses the same masks.
    Train { seed: u64, epoch: u64 },
    /// Running statistics, no dropout. Output per sample does not depend on
    /// the rest of the batch.
    Eval,
}

impl Mode {
    pub fn is_train(self) -> bool {
        matches!(self, Mode::Train { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkLayout {
    pub input_dim: usize,
    /// Output width of each residual block. Empty means the network is the
    /// linear head alone.
    pub block_widths: Vec<usize>,
    pub layers_per_block: usize,
    pub activation: ActivationKind,
    pub dropout_rate: f64,
    pub batch_norm: bool,
    /// `false` gives the plain feed-forward ablation with no shortcut path.
    pub shortcut: bool,
}

impl NetworkLayout {
    /// `n_blocks` blocks of equal width, batch norm and shortcuts on.
    pub fn uniform(
        input_dim: usize,
        n_blocks: usize,
        width: usize,
        layers_per_block: usize,
        activation: ActivationKind,
        dropout_rate: f64,
    ) -> Self {
        Self {
            input_dim,
            block_widths: vec![width; n_blocks],
            layers_per_block,
            activation,
            dropout_rate,
            batch_norm: true,
            shortcut: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("input dimension must be positive".into()));
        }
        if self.block_widths.contains(&0) {
            return Err(Error::Config("block widths must be positive".into()));
        }
        if !self.block_widths.is_empty() && self.layers_per_block == 0 {
            return Err(Error::Config("blocks need at least one dense layer".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    pub fn output_width(&self) -> usize {
        self.block_widths.last().copied().unwrap_or(self.input_dim)
    }
}
