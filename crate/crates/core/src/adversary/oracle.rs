//! Exact forging probabilities.
//!
//! [`forge_success_oracle`] enumerates every list instantiation and every
//! candidate subset the forger could pick; [`forge_success_closed_form`]
//! evaluates the same quantity by counting. The two share no code and are
//! cross-checked in tests.
//!
//! The forger targets bit 1 against a sender claim for bit 0. Forging success
//! does not depend on where the sender's symbols sit inside a segment, so each
//! segment uses the canonical arrangement `0..0 1..1 2..2`. Disclosed segments
//! supply `m/2` positions known to hold the target bit on the target's list
//! (`m/3` agreement positions plus the target's `m/6` discord ones); only
//! undisclosed segments need enumerating.

use thiserror::Error;

use crate::scalar::{binomial, Probability};

/// Largest `d * m` accepted by [`forge_success_oracle`]. At 24 the worst case
/// (`m = 24, d = 1`) is about 2.4 million subset checks.
pub const MAX_ENUMERATION_LENGTH: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("segment length must be a positive multiple of 6, got {0}")]
    InvalidLength(usize),
    #[error("distributor count must be at least 1")]
    NoDistributors,
    #[error("disclosure mask has {found} entries for {expected} distributors")]
    MaskLength { expected: usize, found: usize },
    #[error("at least one target is required")]
    NoTargets,
    #[error("total list length {0} exceeds the enumeration bound {MAX_ENUMERATION_LENGTH}")]
    TooLarge(usize),
}

fn check_args(m: usize, d: usize, disclosed: &[bool], targets: usize) -> Result<(), OracleError> {
    if m == 0 || !m.is_multiple_of(6) {
        return Err(OracleError::InvalidLength(m));
    }
    if d == 0 {
        return Err(OracleError::NoDistributors);
    }
    if disclosed.len() != d {
        return Err(OracleError::MaskLength {
            expected: d,
            found: disclosed.len(),
        });
    }
    if targets == 0 {
        return Err(OracleError::NoTargets);
    }
    Ok(())
}

/// Positions still to be guessed after the known ones are used.
fn guesses_needed(m: usize, d: usize, disclosed_count: usize) -> usize {
    (d * m / 3).saturating_sub(disclosed_count * m / 2)
}

/// All bitmasks over `positions` with exactly `ones` bits set.
fn balanced_masks(positions: &[usize], ones: usize) -> Vec<u32> {
    let n = positions.len();
    (0u32..(1 << n))
        .filter(|sel| sel.count_ones() as usize == ones)
        .map(|sel| {
            (0..n)
                .filter(|i| sel & (1 << i) != 0)
                .fold(0u32, |acc, i| acc | (1 << positions[i]))
        })
        .collect()
}

/// Cartesian product of per-segment masks, OR-ed together.
fn product_masks(per_segment: &[Vec<u32>]) -> Vec<u32> {
    per_segment.iter().fold(vec![0u32], |acc, options| {
        acc.iter()
            .flat_map(|a| options.iter().map(move |o| a | o))
            .collect()
    })
}

/// Exact probability that a forged claim passes at all `targets` honest
/// receivers, by exhaustive enumeration.
///
/// `disclosed[s]` marks segment `s` as leaked to the adversary. With several
/// targets the forger builds an independent claim per target.
pub fn forge_success_oracle<T: Probability>(
    m: usize,
    d: usize,
    disclosed: &[bool],
    targets: usize,
) -> Result<T, OracleError> {
    check_args(m, d, disclosed, targets)?;
    let total = d * m;
    if total > MAX_ENUMERATION_LENGTH {
        return Err(OracleError::TooLarge(total));
    }
    let needed = guesses_needed(m, d, disclosed.iter().filter(|x| **x).count());
    if needed == 0 {
        return Ok(T::one());
    }

    let third = m / 3;
    let mut agreement_ones = 0u32;
    let mut discord_by_segment = Vec::new();
    for s in (0..d).filter(|s| !disclosed[*s]) {
        let base = s * m;
        for j in third..2 * third {
            agreement_ones |= 1 << (base + j);
        }
        discord_by_segment.push((2 * third..m).map(|j| base + j).collect::<Vec<_>>());
    }
    let per_segment: Vec<Vec<u32>> = discord_by_segment
        .iter()
        .map(|disc| balanced_masks(disc, m / 6))
        .collect();
    let assignments = product_masks(&per_segment);

    let mut sum = T::zero();
    for forger_ones in &assignments {
        let candidates: Vec<usize> = (0..total)
            .filter(|x| (agreement_ones | forger_ones) & (1 << x) != 0)
            .collect();
        let choices = balanced_masks(&candidates, needed);
        let mut hits: u128 = 0;
        for target_ones in &assignments {
            let good = agreement_ones | target_ones;
            hits += choices.iter().filter(|c| *c & !good == 0).count() as u128;
        }
        let per_target = T::from_ratio(hits, (assignments.len() * choices.len()) as u128);
        sum = sum + per_target.pow(targets);
    }
    Ok(sum / T::from_ratio(assignments.len() as u128, 1))
}

/// The same probability as [`forge_success_oracle`], by counting.
///
/// The forger picks `r` positions uniformly from `u·m/3` agreement positions
/// and `u·m/6` of its own discord ones across `u` undisclosed segments. A pick
/// with `k` discord positions in one segment survives that segment's balanced
/// target pattern with probability `C(m/3-k, m/6-k) / C(m/3, m/6)`.
pub fn forge_success_closed_form<T: Probability>(
    m: usize,
    d: usize,
    disclosed: &[bool],
    targets: usize,
) -> Result<T, OracleError> {
    check_args(m, d, disclosed, targets)?;
    let undisclosed = disclosed.iter().filter(|x| !**x).count();
    let needed = guesses_needed(m, d, d - undisclosed);
    if needed == 0 {
        return Ok(T::one());
    }
    let (third, sixth) = (m / 3, m / 6);

    // weight[k]: ways to take k own-discord positions from one segment, times
    // the chance the target holds the forged bit on all of them.
    let all_patterns: T = binomial(third, sixth);
    let weight: Vec<T> = (0..=sixth)
        .map(|k| {
            binomial::<T>(sixth, k) * binomial::<T>(third - k, sixth - k) / all_patterns.clone()
        })
        .collect();
    let mut by_total = vec![T::one()];
    for _ in 0..undisclosed {
        let mut next = vec![T::zero(); by_total.len() + sixth];
        for (i, a) in by_total.iter().enumerate() {
            for (k, w) in weight.iter().enumerate() {
                next[i + k] = next[i + k].clone() + a.clone() * w.clone();
            }
        }
        by_total = next;
    }

    let agreement = undisclosed * third;
    let pool: T = binomial(undisclosed * (third + sixth), needed);
    let single = by_total
        .into_iter()
        .enumerate()
        .filter(|(k, _)| *k <= needed)
        .fold(T::zero(), |acc, (k, w)| {
            acc + w * binomial::<T>(agreement, needed - k)
        })
        / pool;
    Ok(single.pow(targets))
}

/// The coarse estimate `(1/2)^(M/3)` for a list of total length `M`, which
/// assumes every guessed position is a discord position.
pub fn heuristic_forge_estimate<T: Probability>(total_len: usize) -> T {
    T::from_ratio(1, 2).pow(total_len / 3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn q(n: u128, d: u128) -> BigRational {
        BigRational::from_ratio(n, d)
    }

    #[test]
    fn m6_single_target_is_two_thirds() {
        let p: BigRational = forge_success_oracle(6, 1, &[false], 1).unwrap();
        assert_eq!(p, q(2, 3));
    }

    #[test]
    fn full_disclosure_is_certain() {
        for (m, d) in [(6, 1), (6, 3), (12, 2)] {
            let mask = vec![true; d];
            assert_eq!(
                forge_success_oracle::<BigRational>(m, d, &mask, 2).unwrap(),
                q(1, 1)
            );
            assert_eq!(
                forge_success_closed_form::<BigRational>(m, d, &mask, 2).unwrap(),
                q(1, 1)
            );
        }
    }

    #[test]
    fn larger_segments_are_harder() {
        let p6: BigRational = forge_success_oracle(6, 1, &[false], 1).unwrap();
        let p12: BigRational = forge_success_oracle(12, 1, &[false], 1).unwrap();
        assert!(p12 < p6);
    }

    #[test]
    fn heuristic_values() {
        assert_eq!(heuristic_forge_estimate::<BigRational>(6), q(1, 4));
        assert_eq!(heuristic_forge_estimate::<f64>(18), 1.0 / 64.0);
    }

    #[test]
    fn argument_errors() {
        assert_eq!(
            forge_success_oracle::<f64>(7, 1, &[false], 1),
            Err(OracleError::InvalidLength(7))
        );
        assert_eq!(
            forge_success_oracle::<f64>(6, 0, &[], 1),
            Err(OracleError::NoDistributors)
        );
        assert_eq!(
            forge_success_oracle::<f64>(6, 2, &[false], 1),
            Err(OracleError::MaskLength {
                expected: 2,
                found: 1
            })
        );
        assert_eq!(
            forge_success_oracle::<f64>(6, 1, &[false], 0),
            Err(OracleError::NoTargets)
        );
        assert_eq!(
            forge_success_oracle::<f64>(30, 1, &[false], 1),
            Err(OracleError::TooLarge(30))
        );
        assert!(forge_success_closed_form::<f64>(30, 1, &[false], 1).is_ok());
    }

    #[test]
    fn float_and_exact_agree() {
        let exact: BigRational = forge_success_closed_form(18, 1, &[false], 1).unwrap();
        let approx: f64 = forge_success_closed_form(18, 1, &[false], 1).unwrap();
        assert!((exact.to_f64() - approx).abs() < 1e-12);
        let single: f32 = forge_success_oracle(6, 1, &[false], 1).unwrap();
        assert!((single - 2.0 / 3.0).abs() < 1e-6);
    }
}
