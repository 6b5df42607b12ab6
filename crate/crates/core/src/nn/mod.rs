//! Minimal neural-network machinery over sparse weights: feedforward and
//! convolutional layers, manual backpropagation, smoothed cross-entropy, and
//! SGD with momentum. Weight matrices only ever exist as connection sets.

mod conv;
mod engine;
mod loss;
mod model;
mod optimizer;
mod params;

pub use conv::{col2im, im2col, ConvGeometry};
pub use engine::{backward, forward, ActivationCache, Gradients};
pub use loss::cross_entropy;
pub use model::{LayerShape, LayerSpec, Loss, ModelSpec};
pub use optimizer::{sgd_step, OptimizerState};
pub use params::{init_weights, LayerParams, ModelParams};

use thiserror::Error;

use crate::sparse::SparseError;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("missing cache: {0}")]
    MissingCache(String),
    #[error(transparent)]
    Sparse(#[from] SparseError),
}
