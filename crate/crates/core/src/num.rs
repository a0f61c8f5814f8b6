//! Scalar abstraction shared by the policy and analysis modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar type the closed forms are evaluated in. Implemented for `f32`
/// and `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Summation cutoff for the adaptive series: the tail bound must fall below
    /// this before a sum is accepted.
    const SERIES_TOLERANCE: Self;

    /// Converts an `f64` literal. Values used by this crate are always
    /// representable, so this never fails.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count fits in a float")
    }
}

impl Real for f32 {
    const SERIES_TOLERANCE: Self = f32::EPSILON;
}

impl Real for f64 {
    const SERIES_TOLERANCE: Self = 1e-12;
}

/// `ln(n!)`: exact accumulation for small n, Stirling series above.
pub fn ln_factorial<T: Real>(n: u64) -> T {
    const EXACT_UP_TO: u64 = 32;
    if n < 2 {
        return T::zero();
    }
    if n <= EXACT_UP_TO {
        return (2..=n).map(|k| T::from_count(k).ln()).sum();
    }
    let x = T::from_count(n);
    let x2 = x * x;
    let x3 = x2 * x;
    let x5 = x3 * x2;
    let x7 = x5 * x2;
    x * x.ln() - x + T::lit(0.5) * (T::lit(2.0) * T::PI() * x).ln() + T::one() / (T::lit(12.0) * x)
        - T::one() / (T::lit(360.0) * x3)
        + T::one() / (T::lit(1260.0) * x5)
        - T::one() / (T::lit(1680.0) * x7)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_factorial_matches_direct_sum() {
        for n in [0u64, 1, 2, 5, 32, 33, 40, 100, 171, 1000] {
            let direct: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
            let got: f64 = ln_factorial(n);
            assert!(
                (got - direct).abs() <= 1e-12 * direct.max(1.0),
                "n={n}: {got} vs {direct}"
            );
        }
        let f: f32 = ln_factorial(10);
        assert!((f - 15.104413).abs() < 1e-5);
    }
}
