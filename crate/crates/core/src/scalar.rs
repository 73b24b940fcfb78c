//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! The reward algebra, Pareto checks and covariance decomposition only need
//! field operations and ordering, so they are written once against
//! [`Scalar`] and run unchanged on `f32`, `f64` or exact rationals.

use std::fmt::Debug;

use num_rational::{Ratio, Rational64};
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Numeric type usable for dollar amounts, rates and objective values.
pub trait Scalar:
    Num + Signed + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    /// `false` for NaN and infinities; rationals are always finite.
    fn is_finite_value(self) -> bool;

    /// Exact conversion of a count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Lossy conversion used for reporting and log-space grids.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

macro_rules! float_scalar {
    ($($t:ty),*) => {$(
        impl Scalar for $t {
            fn is_finite_value(self) -> bool {
                self.is_finite()
            }
        }
    )*};
}

float_scalar!(f32, f64);

impl Scalar for Rational64 {
    fn is_finite_value(self) -> bool {
        true
    }
}

impl Scalar for Ratio<i128> {
    fn is_finite_value(self) -> bool {
        true
    }
}

/// Arithmetic mean in slice order. `None` for an empty input.
pub(crate) fn mean<T: Scalar>(values: impl IntoIterator<Item = T>) -> Option<T> {
    let mut sum = T::zero();
    let mut n = 0usize;
    for v in values {
        sum = sum + v;
        n += 1;
    }
    (n > 0).then(|| sum / T::from_count(n))
}

/// Fraction of `true` flags, computed from exact counts.
pub(crate) fn rate<T: Scalar>(flags: impl IntoIterator<Item = bool>) -> Option<T> {
    let mut hits = 0usize;
    let mut n = 0usize;
    for f in flags {
        hits += usize::from(f);
        n += 1;
    }
    (n > 0).then(|| T::from_count(hits) / T::from_count(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_rate_agree_across_scalars() {
        assert_eq!(mean([1.0f64, 2.0, 6.0]), Some(3.0));
        assert_eq!(
            mean([Rational64::new(1, 3), Rational64::new(2, 3)]),
            Some(Rational64::new(1, 2))
        );
        assert_eq!(rate::<f32>([true, false, false, false]), Some(0.25));
        assert_eq!(
            rate::<Rational64>([true, true, false]),
            Some(Rational64::new(2, 3))
        );
        assert_eq!(mean::<f64>([]), None);
    }

    #[test]
    fn finiteness() {
        assert!(!f64::NAN.is_finite_value());
        assert!(!f32::INFINITY.is_finite_value());
        assert!(Rational64::new(7, 3).is_finite_value());
    }
}
