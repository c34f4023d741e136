//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating point type usable as the scalar of grids, operators and solvers.
///
/// Implemented for `f32` and `f64`. Constants that come from special
/// functions are evaluated in `f64` and narrowed with [`Real::lit`].
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Never fails for finite input.
    fn lit(x: f64) -> Self;

    /// Widening conversion used for I/O and special-function evaluation.
    fn as_f64(self) -> f64;

    /// Converts a count or an index.
    fn from_count(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Sums values in ascending order of magnitude.
///
/// Used for masses and norms so that long accumulations of very different
/// magnitudes (solution cores against power-law tails) do not lose the tail.
pub fn sorted_sum<T: Real>(values: impl IntoIterator<Item = T>) -> T {
    let mut v: Vec<T> = values.into_iter().collect();
    v.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap_or(std::cmp::Ordering::Equal));
    v.into_iter().fold(T::zero(), |acc, x| acc + x)
}
