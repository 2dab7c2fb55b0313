//! Scalar abstraction for the numeric kernel.
//!
//! Everything downstream is generic over [`Scalar`], so the same code runs in
//! `f32` and `f64`. Concrete aliases for the main types live at the crate
//! root.

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the kernel computes with.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Lift an `f64` constant into the working scalar type.
#[inline]
pub fn real<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant converts into every Scalar")
}

/// Round a scalar back to `f64`, for diagnostics and serialization.
#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Pairwise tree summation.
///
/// Splits at the midpoint all the way down, so the reduction order is a fixed
/// binary tree independent of chunking or threading. Sums that feed reported
/// numbers go through this, which keeps results bit-reproducible and the
/// rounding error growth logarithmic in the term count.
pub fn pairwise_sum<T: Scalar>(xs: &[T]) -> T {
    match xs.len() {
        0 => T::zero(),
        1 => xs[0],
        n => {
            let (lo, hi) = xs.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}
