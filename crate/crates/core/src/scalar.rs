//! Scalar abstraction for the numeric kernels (scoring, embeddings, density).

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for constants and embeddings.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 is representable in every Real")
    }
}

impl Real for f32 {}
impl Real for f64 {}
