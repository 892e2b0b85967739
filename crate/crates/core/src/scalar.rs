//! Floating-point scalar abstraction.
//!
//! Every numeric routine in the crate is written against [`Scalar`] so the
//! same solver, verifier and classifier run in `f32` or `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar type: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only if the target type cannot
    /// represent it at all, which never happens for `f32`/`f64`.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).unwrap_or_else(Self::max_value)
    }

    /// `1.5` is used often enough (the `|u|^{3/2}` family) to deserve a name.
    #[inline]
    fn three_halves() -> Self {
        Self::lit(1.5)
    }

    /// Slack used by descent-style inequality checks: `1e-10` in double
    /// precision, scaled up when the type's epsilon is coarser.
    #[inline]
    fn check_slack() -> Self {
        Self::lit(1e-10).max(Self::epsilon() * Self::lit(64.0))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Euclidean norm of a slice.
pub fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&a| a * a).sum::<T>().sqrt()
}

/// Euclidean distance between two slices of equal length.
pub fn dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&u, &v)| (u - v) * (u - v))
        .sum::<T>()
        .sqrt()
}

/// Sign with `sign(0) = 0`, unlike `Float::signum`.
#[inline]
pub fn sign<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_and_dist() {
        assert_eq!(norm(&[3.0_f64, 4.0]), 5.0);
        assert_eq!(dist(&[1.0_f32, 1.0], &[4.0, 5.0]), 5.0);
        assert_eq!(norm::<f64>(&[]), 0.0);
    }

    #[test]
    fn sign_of_zero_is_zero() {
        assert_eq!(sign(0.0_f64), 0.0);
        assert_eq!(sign(-0.0_f64), 0.0);
        assert_eq!(sign(-2.0_f32), -1.0);
    }

    #[test]
    fn slack_scales_with_epsilon() {
        assert_eq!(f64::check_slack(), 1e-10);
        assert!(f32::check_slack() > 1e-6);
    }
}
