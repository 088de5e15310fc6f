//! Floating-point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the estimators are generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into `Self`, rounding if necessary.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 constant is representable")
    }

    /// Lossy conversion to `f64` for reporting and random draws.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Absolute tolerance used when checking that mixture weights sum to one.
///
/// Equals `1e-12` for `f64`; wider for types whose epsilon makes that
/// unreachable.
pub fn weight_tolerance<T: Scalar>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(4096.0))
}

/// Numerically stable `ln(sum(exp(v)))`. Returns `-inf` for an empty or
/// all-`-inf` input.
pub fn log_sum_exp<T: Scalar>(values: &[T]) -> T {
    let max = values
        .iter()
        .copied()
        .fold(T::neg_infinity(), |acc, v| acc.max(v));
    if max == T::neg_infinity() || !max.is_finite() {
        return max;
    }
    let sum: T = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}
