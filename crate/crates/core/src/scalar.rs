//! Floating-point abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the filter, policy and metrics are written against.
///
/// Implemented for `f32` and `f64`. Experiments run in `f64`; the `f32`
/// instantiation exists for memory-constrained evaluation of frozen policies.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal or configuration value.
    fn lit(x: f64) -> Self;

    /// Lossless for `f64`, rounding for `f32`.
    fn to_f64_lossy(self) -> f64;

    fn from_usize_exact(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

impl Scalar for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// Least-squares slope of `ys` against the index `0, 1, ..`.
///
/// Returns zero for fewer than two points.
pub fn ls_slope<T: Scalar>(ys: &[T]) -> T {
    let n = ys.len();
    if n < 2 {
        return T::zero();
    }
    let nf = T::from_usize_exact(n);
    let x_mean = T::from_usize_exact(n - 1) / T::lit(2.0);
    let y_mean = ys.iter().copied().sum::<T>() / nf;
    let mut num = T::zero();
    let mut den = T::zero();
    for (i, &y) in ys.iter().enumerate() {
        let dx = T::from_usize_exact(i) - x_mean;
        num = num + dx * (y - y_mean);
        den = den + dx * dx;
    }
    num / den
}
