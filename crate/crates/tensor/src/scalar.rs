use std::fmt::{Debug, Display};

use num_traits::Float;

/// Floating point element type of a [`Tensor`](crate::Tensor).
///
/// `f64` is the default everywhere; `f32` trades precision for speed and
/// is not suitable for gradient checking.
pub trait Scalar: Float + Debug + Display + Default + Send + Sync + 'static {
    /// Name used in archive manifests.
    const DTYPE: &'static str;

    fn from_f64(v: f64) -> Self;

    fn as_f64(self) -> f64;
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";

    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";

    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}
