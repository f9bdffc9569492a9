use std::fmt::Debug;
use std::iter::Sum;

use num_traits::Float;

/// Floating point element type of the engine.
///
/// Models run in `f32`; gradient checks run the same code paths in `f64`.
pub trait Real: Float + Default + Debug + Send + Sync + Sum + 'static {
    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}
