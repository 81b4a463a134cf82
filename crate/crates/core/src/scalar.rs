//! Probability scalars.
//!
//! Every estimate in a model is a ratio of integer counts. The arithmetic on
//! top of those ratios (trail products, divergences, ranking metrics) is
//! generic over [`Scalar`], so the same code runs in `f64` for speed or in
//! [`BigRational`] when ties and thresholds must be decided exactly.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive};

/// A numeric type probabilities can be computed in.
pub trait Scalar: Num + Signed + Clone + PartialOrd + Debug + Display + Send + Sync + 'static {
    /// `num / den`. `den` must be non-zero.
    fn ratio(num: u128, den: u128) -> Self;

    /// Lossy conversion from a float, used for user-supplied thresholds.
    fn from_f64(value: f64) -> Self;

    /// Lossy conversion to a float, used for reporting.
    fn to_f64(&self) -> f64;

    fn from_count(n: u64) -> Self {
        Self::ratio(u128::from(n), 1)
    }
}

impl Scalar for f64 {
    fn ratio(num: u128, den: u128) -> Self {
        num as f64 / den as f64
    }

    fn from_f64(value: f64) -> Self {
        value
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for f32 {
    fn ratio(num: u128, den: u128) -> Self {
        (num as f64 / den as f64) as f32
    }

    fn from_f64(value: f64) -> Self {
        value as f32
    }

    fn to_f64(&self) -> f64 {
        f64::from(*self)
    }
}

impl Scalar for BigRational {
    fn ratio(num: u128, den: u128) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_f64(value: f64) -> Self {
        BigRational::from_float(value).unwrap_or_else(|| BigRational::from_integer(BigInt::from(0)))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Sum of an iterator of scalars.
pub fn sum<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    values.into_iter().fold(T::zero(), |acc, v| acc + v)
}

/// Largest element, `zero` for an empty iterator.
pub fn max<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    values.into_iter().fold(T::zero(), |acc, v| if v > acc { v } else { acc })
}

/// Descending comparison that treats incomparable values as equal.
pub(crate) fn cmp_desc<T: PartialOrd>(a: &T, b: &T) -> std::cmp::Ordering {
    b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal)
}
