//! Scalar abstraction so the numeric core works with `f32` or `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar used throughout the crate.
///
/// Everything numeric (datasets, weights, forests, metrics) is generic over
/// this trait; `f32` and `f64` are the supported instantiations. Concrete
/// type aliases for both live at the crate root.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used when sampling (RNG streams are
    /// always driven in `f64` so a fixed seed produces the same draws
    /// regardless of the scalar type).
    fn from_f64_lossy(value: f64) -> Self {
        Self::from(value).expect("finite f64 converts to any scalar")
    }

    /// Widening conversion to `f64` for linear-algebra kernels.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// Exact for counts below 2^53 (2^24 for `f32`), which covers every
    /// dataset size handled here.
    fn from_count(value: usize) -> Self {
        Self::from_f64_lossy(value as f64)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
