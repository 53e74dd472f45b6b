//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

/// Floating point scalar the library is generic over (`f32` or `f64`).
pub trait Scalar:
    Float
    + FromPrimitive
    + Debug
    + Display
    + LowerExp
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Relative tolerance under which two channel values are considered the
/// same level (product channels built in different factor orders differ in
/// the last ulp).
pub(crate) const VALUE_TIE_REL: f64 = 1e-12;

/// `w >= z` up to the value-tie tolerance.
#[inline]
pub(crate) fn value_ge<T: Scalar>(w: T, z: T) -> bool {
    w >= z - tie_rel::<T>() * w.abs().max(z.abs())
}

#[inline]
pub(crate) fn tie_rel<T: Scalar>() -> T {
    T::lit(VALUE_TIE_REL).max(T::epsilon() * T::lit(16.0))
}

/// `w > z` up to the value-tie tolerance (the negation of `z >= w`).
#[inline]
pub(crate) fn value_gt<T: Scalar>(w: T, z: T) -> bool {
    !value_ge(z, w)
}

/// `log(sum(exp(xs)))` with the usual max shift; `-inf` for an empty or
/// all-`-inf` input.
pub fn log_sum_exp<T: Scalar>(xs: impl IntoIterator<Item = T>) -> T {
    let xs: Vec<T> = xs.into_iter().collect();
    let m = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    let s: T = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Table of `ln k!` for `k = 0..=n`.
pub fn log_factorials<T: Scalar>(n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = T::zero();
    out.push(acc);
    for k in 1..=n {
        acc += T::from_usize_lossy(k).ln();
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let xs = [0.1f64.ln(), 0.2f64.ln(), 0.3f64.ln()];
        assert!((log_sum_exp(xs) - 0.6f64.ln()).abs() < 1e-15);
        assert_eq!(log_sum_exp::<f64>([]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY]), f64::NEG_INFINITY);
        // large offsets do not overflow
        assert!((log_sum_exp([1000.0f64, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn log_factorial_table() {
        let t = log_factorials::<f64>(10);
        assert_eq!(t[0], 0.0);
        assert!((t[5] - 120f64.ln()).abs() < 1e-13);
        assert!((t[10] - 3628800f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn value_ties() {
        let a = 0.7f64 * 0.3 * 0.7;
        let b = 0.7f64 * 0.7 * 0.3;
        assert!(value_ge(a, b) && value_ge(b, a));
        assert!(!value_gt(a, b) && !value_gt(b, a));
        assert!(value_gt(0.5f64, 0.4));
        assert!(value_ge(0.0f64, 0.0));
    }
}
