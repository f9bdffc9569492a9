//! Encoders, predictors, recurrent contexts, relation heads and their losses.

mod bundle;
mod config;
pub mod gradsuite;
mod losses;

pub use bundle::{to_input, Forward, ModelBundle};
pub use config::{ContextKind, EncoderConfig, EncoderKind, ModelConfig, Objective, PredictorKind, Variant};
pub use losses::{
    error_matrix, infonce_from_errors, nocontrast_from_errors, prediction_error, relation_loss, Negatives,
};

use crate::autodiff::TensorError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("sequence of {m} images is too short (need at least {min})")]
    TooShort { m: usize, min: usize },
    #[error("latent dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("model has no relation head")]
    MissingHead,
    #[error("model has no predictor")]
    MissingPredictor,
    #[error("invalid model config: {0}")]
    Config(String),
}
