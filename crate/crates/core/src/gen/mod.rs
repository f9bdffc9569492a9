//! Sequence-consistency test generation.

mod features;
mod manifest;
pub mod pgm;
mod render;
mod rule;
mod sample;

pub use features::{Feature, FeatureSet, FeatureValue, FeatureVector, Shape, GRID_CELLS};
pub use manifest::{load_test, write_test, TestManifest};
pub use render::{draw_objects, render, Image, RenderConfig};
pub use rule::{apply_rule, Rule};
pub use sample::{
    condition_grid, full_grid, generate, sample_test, sample_test_with, SceTest, TestSpec, DEFAULT_K, DEFAULT_N,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("wrong feature: {0}")]
    WrongFeature(String),
    #[error("infeasible spec: {0}")]
    InfeasibleSpec(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
}
