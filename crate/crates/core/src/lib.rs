//! Survival-risk prediction with residual feed-forward networks trained on
//! the Cox negative log partial likelihood.
//!
//! The crate is organised bottom-up:
//!
//! - [`dataset`]: CSV ingestion, patient/feature filtering, standardization,
//!   stratified folds and a Weibull proportional-hazards data generator.
//! - [`cox`]: the Cox loss, its gradient with respect to risk scores, the L2
//!   penalty and a Newton-Raphson linear Cox fitter.
//! - [`model`]: residual blocks with batch norm, dropout and a learned
//!   shortcut, with exact manual backpropagation.
//! - [`train`]: optimizers, the epoch loop with early stopping, k-fold
//!   cross-validation, grid search and model comparison.
//! - [`metrics`]: Harrell's concordance index.
//! - [`cli`]: the `ressurv` command-line front end.
//!
//! Throughout, a higher risk score means a higher hazard, i.e. an earlier
//! expected event.

// `!(x > 0.0)` style checks are used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cox;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod model;
mod rng;
pub mod train;

pub use cox::{LinearCoxFit, RiskSetIndex};
pub use dataset::{
    CsvSchema, FoldAssignment, StandardizationParams, SurvivalDataset, SyntheticSpec,
};
pub use error::{Error, Result};
pub use metrics::ConcordanceResult;
pub use model::{ActivationKind, Mode, NetworkLayout, ResSurvParams};
pub use train::{Hyperparameters, OptimizerKind, TrainReport};
