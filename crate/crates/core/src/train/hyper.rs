use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActivationKind, NetworkLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
    Adamw,
}

/// Search-grid domains.
pub mod domain {
    use super::{ActivationKind, OptimizerKind};

    pub const OPTIMIZER: [OptimizerKind; 3] = [
        OptimizerKind::Adam,
        OptimizerKind::Adamw,
        OptimizerKind::Sgd,
    ];
    pub const ACTIVATION: [ActivationKind; 3] = [
        ActivationKind::Tanh,
        ActivationKind::Selu,
        ActivationKind::Relu,
    ];
    pub const N_BLOCKS: [usize; 3] = [5, 6, 7];
    pub const DENSE_LAYERS: [usize; 4] = [3, 4, 5, 6];
    pub const NODES: [usize; 4] = [64, 128, 512, 1024];
    pub const LEARNING_RATE: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
    pub const L2_LAMBDA: [f64; 4] = [2.0, 4.0, 6.0, 8.0];
    pub const DROPOUT: [f64; 3] = [0.2, 0.4, 0.6];
    pub const LR_DECAY: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];
}

/// With AdamW, `l2_lambda` becomes decoupled weight decay `l2_lambda * ADAMW_DECAY_SCALE`.
/// The grid values (2 to 8) are loss-penalty magnitudes; used directly as
/// a per-step decay they would zero the weights.
pub const ADAMW_DECAY_SCALE: f64 = 1e-3;

/// Minimum decrease in validation NLL that resets the patience counter.
pub const EARLY_STOP_MIN_DELTA: f64 = 1e-6;

/// One point of the search grid plus protocol knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub optimizer: OptimizerKind,
    pub activation: ActivationKind,
    pub n_blocks: usize,
    pub dense_layers_per_block: usize,
    pub nodes: usize,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub dropout_rate: f64,
    pub lr_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// `None` trains full-batch. `Some(b)` trains on shuffled mini-batches of
    /// `b` samples whose risk sets are restricted to the batch; batches with
    /// fewer than [`MIN_BATCH_EVENTS`] events are skipped. This changes the
    /// objective and is meant only for datasets too large for full batches.
    pub batch_size: Option<usize>,
    /// `false` removes every shortcut (plain feed-forward ablation).
    pub shortcut: bool,
}

pub const MIN_BATCH_SIZE: usize = 64;
pub const MIN_BATCH_EVENTS: usize = 4;

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            activation: ActivationKind::Selu,
            n_blocks: 5,
            dense_layers_per_block: 3,
            nodes: 64,
            learning_rate: 1e-2,
            l2_lambda: 1e-3,
            dropout_rate: 0.2,
            lr_decay: 1e-3,
            max_epochs: 500,
            patience: 10,
            seed: 0,
            batch_size: None,
            shortcut: true,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_blocks > 0 && (self.dense_layers_per_block == 0 || self.nodes == 0) {
            return bad("dense_layers_per_block and nodes must be positive".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be finite and nonnegative, got {}",
                self.learning_rate
            ));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return bad(format!(
                "l2_lambda must be finite and nonnegative, got {}",
                self.l2_lambda
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            ));
        }
        if !(self.lr_decay >= 0.0 && self.lr_decay.is_finite()) {
            return bad(format!(
                "lr_decay must be finite and nonnegative, got {}",
                self.lr_decay
            ));
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return bad("max_epochs and patience must be at least 1".into());
        }
        if let Some(b) = self.batch_size {
            if b < MIN_BATCH_SIZE {
                return bad(format!(
                    "batch_size must be at least {MIN_BATCH_SIZE}, got {b}"
                ));
            }
        }
        Ok(())
    }

    /// Whether every searched field takes one of the grid's values.
    pub fn on_grid(&self) -> bool {
        domain::OPTIMIZER.contains(&self.optimizer)
            && domain::ACTIVATION.contains(&self.activation)
            && domain::N_BLOCKS.contains(&self.n_blocks)
            && domain::DENSE_LAYERS.contains(&self.dense_layers_per_block)
            && domain::NODES.contains(&self.nodes)
            && domain::LEARNING_RATE.contains(&self.learning_rate)
            && domain::L2_LAMBDA.contains(&self.l2_lambda)
            && domain::DROPOUT.contains(&self.dropout_rate)
            && domain::LR_DECAY.contains(&self.lr_decay)
    }

    pub fn layout(&self, input_dim: usize) -> NetworkLayout {
        let mut layout = NetworkLayout::uniform(
            input_dim,
            self.n_blocks,
            self.nodes,
            self.dense_layers_per_block,
            self.activation,
            self.dropout_rate,
        );
        layout.shortcut = self.shortcut;
        layout
    }

    /// Loss-side L2 coefficient. Zero under AdamW, which decays weights
    /// directly instead.
    pub fn loss_l2(&self) -> f64 {
        match self.optimizer {
            OptimizerKind::Adamw => 0.0,
            _ => self.l2_lambda,
        }
    }

    /// Decoupled weight decay, applied only under AdamW.
    pub fn decoupled_decay(&self) -> Option<f64> {
        (self.optimizer == OptimizerKind::Adamw).then_some(self.l2_lambda * ADAMW_DECAY_SCALE)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let hp: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        hp.validate()?;
        Ok(hp)
    }
}

/// Values to sweep for each searched field. Points are enumerated
/// lexicographically in field order, the last field varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub optimizer: Vec<OptimizerKind>,
    pub activation: Vec<ActivationKind>,
    pub n_blocks: Vec<usize>,
    pub dense_layers_per_block: Vec<usize>,
    pub nodes: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub l2_lambda: Vec<f64>,
    pub dropout_rate: Vec<f64>,
    pub lr_decay: Vec<f64>,
    /// Protocol knobs shared by every point (epochs, patience, seed, ...).
    pub base: Hyperparameters,
}

/// On-disk grid file: an optional `[base]` table and a `[grid]` table whose
/// missing keys fall back to the base value.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    #[serde(default)]
    base: Hyperparameters,
    #[serde(default)]
    grid: GridAxes,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridAxes {
    optimizer: Option<Vec<OptimizerKind>>,
    activation: Option<Vec<ActivationKind>>,
    n_blocks: Option<Vec<usize>>,
    dense_layers_per_block: Option<Vec<usize>>,
    nodes: Option<Vec<usize>>,
    learning_rate: Option<Vec<f64>>,
    l2_lambda: Option<Vec<f64>>,
    dropout_rate: Option<Vec<f64>>,
    lr_decay: Option<Vec<f64>>,
}

impl GridSpec {
    /// Every searched field fixed to the value in `base`.
    pub fn single(base: Hyperparameters) -> Self {
        Self {
            optimizer: vec![base.optimizer],
            activation: vec![base.activation],
            n_blocks: vec![base.n_blocks],
            dense_layers_per_block: vec![base.dense_layers_per_block],
            nodes: vec![base.nodes],
            learning_rate: vec![base.learning_rate],
            l2_lambda: vec![base.l2_lambda],
            dropout_rate: vec![base.dropout_rate],
            lr_decay: vec![base.lr_decay],
            base,
        }
    }

    /// The full cross-product of the search-grid domains.
    pub fn full(base: Hyperparameters) -> Self {
        Self {
            optimizer: domain::OPTIMIZER.to_vec(),
            activation: domain::ACTIVATION.to_vec(),
            n_blocks: domain::N_BLOCKS.to_vec(),
            dense_layers_per_block: domain::DENSE_LAYERS.to_vec(),
            nodes: domain::NODES.to_vec(),
            learning_rate: domain::LEARNING_RATE.to_vec(),
            l2_lambda: domain::L2_LAMBDA.to_vec(),
            dropout_rate: domain::DROPOUT.to_vec(),
            lr_decay: domain::LR_DECAY.to_vec(),
            base,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: GridFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut spec = Self::single(file.base);
        let axes = file.grid;
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = axes.$field { spec.$field = v; })*
            };
        }
        take!(
            optimizer,
            activation,
            n_blocks,
            dense_layers_per_block,
            nodes,
            learning_rate,
            l2_lambda,
            dropout_rate,
            lr_decay
        );
        spec.validate()?;
        Ok(spec)
    }

    fn radices(&self) -> [usize; 9] {
        [
            self.optimizer.len(),
            self.activation.len(),
            self.n_blocks.len(),
            self.dense_layers_per_block.len(),
            self.nodes.len(),
            self.learning_rate.len(),
            self.l2_lambda.len(),
            self.dropout_rate.len(),
            self.lr_decay.len(),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.radices().contains(&0) {
            return Err(Error::Config(
                "every grid axis needs at least one value".into(),
            ));
        }
        self.base.validate()
    }

    pub fn len(&self) -> usize {
        self.radices().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point `index` in enumeration order.
    pub fn point(&self, index: usize) -> Hyperparameters {
        let radices = self.radices();
        let mut digits = [0usize; 9];
        let mut rest = index;
        for (d, r) in digits.iter_mut().zip(radices).rev() {
            *d = rest % r;
            rest /= r;
        }
        Hyperparameters {
            optimizer: self.optimizer[digits[0]],
            activation: self.activation[digits[1]],
            n_blocks: self.n_blocks[digits[2]],
            dense_layers_per_block: self.dense_layers_per_block[digits[3]],
            nodes: self.nodes[digits[4]],
            learning_rate: self.learning_rate[digits[5]],
            l2_lambda: self.l2_lambda[digits[6]],
            dropout_rate: self.dropout_rate[digits[7]],
            lr_decay: self.lr_decay[digits[8]],
            ..self.base.clone()
        }
    }

    /// The first `budget` points in enumeration order.
    pub fn points(&self, budget: usize) -> Vec<Hyperparameters> {
        (0..self.len().min(budget)).map(|i| self.point(i)).collect()
    }
}
