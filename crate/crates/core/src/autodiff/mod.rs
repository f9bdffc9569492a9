//! Minimal reverse-mode differentiation engine: a tape of primitive
//! operations, parameter storage, RMSprop/SGD and gradient checking.

mod gradcheck;
mod optim;
mod params;
mod scalar;
pub mod snapshot;
mod tape;

pub use gradcheck::{grad_check, relative_error, GradCheckReport, FD_STEP};
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};
pub use params::{init_uniform, InitSpec, Param, ParamId, ParamSet};
pub use scalar::Real;
pub use tape::{ConvGeom, Tape, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("shape mismatch in {op} (operation #{index}): {detail}")]
    ShapeMismatch {
        index: usize,
        op: &'static str,
        detail: String,
    },
    #[error("backward needs a scalar loss, got {len} elements")]
    NotScalar { len: usize },
}
