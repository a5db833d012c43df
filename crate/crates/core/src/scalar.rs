//! Scalar abstraction for probability arithmetic.
//!
//! Oracle and closed-form forging probabilities are computed over any type
//! implementing [`Probability`]: `f32`/`f64` for quick estimates, and
//! [`BigRational`] when the exact value matters.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Num;

/// A field-like scalar able to hold a probability.
pub trait Probability: Num + Clone + PartialOrd + Debug {
    /// `numerator / denominator`. The denominator must be nonzero.
    fn from_ratio(numerator: u128, denominator: u128) -> Self;

    /// Lossy conversion for reporting.
    fn to_f64(&self) -> f64;

    fn pow(&self, exponent: usize) -> Self {
        let mut acc = Self::one();
        for _ in 0..exponent {
            acc = acc * self.clone();
        }
        acc
    }
}

impl Probability for f64 {
    fn from_ratio(numerator: u128, denominator: u128) -> Self {
        numerator as f64 / denominator as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn pow(&self, exponent: usize) -> Self {
        self.powi(exponent as i32)
    }
}

impl Probability for f32 {
    fn from_ratio(numerator: u128, denominator: u128) -> Self {
        (numerator as f64 / denominator as f64) as f32
    }

    fn to_f64(&self) -> f64 {
        f64::from(*self)
    }

    fn pow(&self, exponent: usize) -> Self {
        self.powi(exponent as i32)
    }
}

impl Probability for BigRational {
    fn from_ratio(numerator: u128, denominator: u128) -> Self {
        BigRational::new(BigInt::from(numerator), BigInt::from(denominator))
    }

    fn to_f64(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Binomial coefficient `C(n, k)` evaluated in `T` by the multiplicative formula.
pub fn binomial<T: Probability>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    let mut acc = T::one();
    for i in 0..k {
        acc = acc * T::from_ratio((n - i) as u128, (i + 1) as u128);
    }
    acc
}
