//! Binomial confidence intervals.

use num_traits::Float;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sided standard normal quantile for `confidence` (e.g. 0.99 -> 2.5758).
pub fn z_for_confidence(confidence: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.inverse_cdf(0.5 + confidence / 2.0)
}

/// Wilson score interval for `successes` out of `trials` at critical value `z`.
/// Returns `(0, 1)` when there are no trials.
pub fn wilson_interval<T: Float>(successes: u64, trials: u64, z: T) -> (T, T) {
    if trials == 0 {
        return (T::zero(), T::one());
    }
    let n = T::from(trials).unwrap();
    let p = T::from(successes).unwrap() / n;
    let two = T::one() + T::one();
    let four = two + two;
    let z2 = z * z;
    let denom = T::one() + z2 / n;
    let centre = (p + z2 / (two * n)) / denom;
    let half = z * (p * (T::one() - p) / n + z2 / (four * n * n)).sqrt() / denom;
    (
        (centre - half).max(T::zero()),
        (centre + half).min(T::one()),
    )
}

/// A rate with its confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub count: u64,
    pub trials: u64,
    pub rate: f64,
    pub low: f64,
    pub high: f64,
}

impl RateEstimate {
    pub fn new(count: u64, trials: u64, z: f64) -> Self {
        let rate = if trials == 0 {
            0.0
        } else {
            count as f64 / trials as f64
        };
        let (low, high) = wilson_interval(count, trials, z);
        Self {
            count,
            trials,
            rate,
            low,
            high,
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        self.low <= p && p <= self.high
    }
}
