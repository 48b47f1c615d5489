//! Optimizers, the training loop, cross-validation, grid search and model
//! comparison.

mod compare;
mod cv;
mod grid;
pub mod hyper;
pub mod optim;
mod trainer;

pub use compare::{
    compare_models, ComparisonReport, ModelSummary, LINEAR_COX, NO_SHORTCUT, RESSURV,
};
pub use cv::{cross_validate, prepare_fold, CvReport, FoldData, FoldRecord, VALIDATION_FRACTION};
pub use grid::{grid_search, GridPointResult, GridSearchResult};
pub use hyper::{GridSpec, Hyperparameters, OptimizerKind};
pub use optim::{adam_step, adamw_step, decay_learning_rate, sgd_step, OptimizerState};
pub use trainer::{cox_loss_and_gradient, train, EpochRecord, TrainReport};
