//! Iterative range reduction for min/max, the error probability of
//! random-integer bitwise encodings, and the influence bound for malicious
//! data providers.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::EncodingError;

/// Sub-query issued by [`iterative_extreme`] on the half-open range `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremeStep {
    /// Does any data provider hold a value in the range? Answer 0 or 1.
    Exists { lo: i64, hi: i64 },
    /// Range-vector min or max restricted to the range.
    Extreme { lo: i64, hi: i64, maximize: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtremeOutcome {
    pub value: i64,
    /// Halving rounds `g`.
    pub rounds: u32,
    /// Ciphertexts each data provider sends over all sub-queries.
    pub ciphertexts: u64,
}

/// Halving rounds and total per-provider ciphertexts for a domain of width
/// `d`: `g = ⌊log2(d / el)⌋` and `n = g + ⌈d / 2^g⌉`.
pub fn iterative_workload(d: u64, el: u64) -> Result<(u32, u64), EncodingError> {
    if d == 0 || el == 0 {
        return Err(EncodingError::InvalidArgs("domain and EL must be positive".into()));
    }
    // largest g with 2^g * el <= d
    let mut g = 0u32;
    while (el << (g + 1)) <= d {
        g += 1;
    }
    Ok((g, g as u64 + d.div_ceil(1 << g)))
}

/// Finds the max (or min) over `[lo, hi)` by first narrowing the range with
/// `g` existence queries, each keeping the half that must contain the
/// extreme, then running one range-vector query on what is left.
pub fn iterative_extreme<E>(
    lo: i64,
    hi: i64,
    el: u64,
    maximize: bool,
    mut issue: impl FnMut(ExtremeStep) -> Result<i64, E>,
) -> Result<Result<ExtremeOutcome, E>, EncodingError> {
    if hi <= lo {
        return Err(EncodingError::InvalidArgs("empty range".into()));
    }
    let (g, n) = iterative_workload((hi - lo) as u64, el)?;
    let (mut lo, mut hi) = (lo, hi);
    let mut run = || {
        for _ in 0..g {
            let size = hi - lo;
            if maximize {
                let mid = lo + size / 2;
                if issue(ExtremeStep::Exists { lo: mid, hi })? != 0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            } else {
                let mid = lo + (size + 1) / 2;
                if issue(ExtremeStep::Exists { lo, hi: mid })? != 0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
        }
        let value = issue(ExtremeStep::Extreme { lo, hi, maximize })?;
        Ok(ExtremeOutcome {
            value,
            rounds: g,
            ciphertexts: n,
        })
    };
    Ok(run())
}

fn check_error_args(n: u32, order: u64) -> Result<(), EncodingError> {
    if n < 1 || order < 3 {
        return Err(EncodingError::InvalidArgs("need n >= 1 and group order >= 3".into()));
    }
    Ok(())
}

/// Probability that `n` independent uniform nonzero values modulo `order`
/// sum to zero, which a random-integer OR would misread as false:
/// `P_1 = 0`, `P_n = (1 - P_{n-1}) / (order - 1)`.
pub fn bitwise_error_prob_exact(n: u32, order: u64) -> Result<BigRational, EncodingError> {
    check_error_args(n, order)?;
    let inv = BigRational::new(BigInt::one(), BigInt::from(order - 1));
    let mut p = BigRational::zero();
    for _ in 1..n {
        p = (BigRational::one() - p) * &inv;
    }
    Ok(p)
}

pub fn bitwise_error_prob(n: u32, order: u64) -> Result<f64, EncodingError> {
    Ok(bitwise_error_prob_exact(n, order)?.to_f64().unwrap_or(0.0))
}

/// Relative error of an average when `d` malicious providers each send `e`
/// with count `c`, next to `h` honest providers averaging `a_h`.
pub fn malicious_influence(a_h: f64, h: u64, d: u64, e: f64, c: u64) -> Result<f64, EncodingError> {
    if h == 0 || a_h == 0.0 {
        return Err(EncodingError::InvalidArgs("need h > 0 and a_h != 0".into()));
    }
    let a_m = (h as f64 * a_h + e * d as f64) / (h + c) as f64;
    Ok((1.0 - a_m / a_h).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::tests::rng;
    use rand::Rng;
    use std::convert::Infallible;

    fn run(values: &[i64], lo: i64, hi: i64, el: u64, maximize: bool) -> ExtremeOutcome {
        iterative_extreme(lo, hi, el, maximize, |step| -> Result<i64, Infallible> {
            Ok(match step {
                ExtremeStep::Exists { lo, hi } => values.iter().any(|v| (lo..hi).contains(v)) as i64,
                ExtremeStep::Extreme { lo, hi, maximize } => {
                    let inside = values.iter().copied().filter(|v| (lo..hi).contains(v));
                    if maximize { inside.max() } else { inside.min() }.expect("extreme kept in range")
                }
            })
        })
        .unwrap()
        .unwrap()
    }

    #[test]
    fn workload() {
        assert_eq!(iterative_workload(1000, 100).unwrap(), (3, 128));
        assert_eq!(iterative_workload(80, 100).unwrap(), (0, 80));
        assert_eq!(iterative_workload(100, 100).unwrap(), (0, 100));
        assert!(iterative_workload(10, 0).is_err());
    }

    #[test]
    fn example_max() {
        let out = run(&[3, 42, 77], 0, 100, 25, true);
        assert_eq!(out.value, 77);
        assert_eq!(out.rounds, 2);
        assert_eq!(run(&[3, 42, 77], 0, 100, 25, false).value, 3);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = rng();
        for _ in 0..300 {
            let lo = rng.gen_range(-50..50);
            let hi = lo + rng.gen_range(1..400);
            let el = rng.gen_range(1..60);
            let values: Vec<i64> = (0..rng.gen_range(1..8)).map(|_| rng.gen_range(lo..hi)).collect();
            assert_eq!(run(&values, lo, hi, el, true).value, *values.iter().max().unwrap());
            assert_eq!(run(&values, lo, hi, el, false).value, *values.iter().min().unwrap());
        }
    }

    #[test]
    fn callback_errors_propagate() {
        let r = iterative_extreme(0, 100, 10, true, |_| Err::<i64, _>("down")).unwrap();
        assert_eq!(r, Err("down"));
    }

    /// Counts tuples of nonzero residues whose sum is zero.
    fn enumerate(n: u32, order: u64) -> BigRational {
        let mut hits = 0u64;
        let total = (order - 1).pow(n);
        for t in 0..total {
            let (mut x, mut sum) = (t, 0);
            for _ in 0..n {
                sum += x % (order - 1) + 1;
                x /= order - 1;
            }
            hits += (sum % order == 0) as u64;
        }
        BigRational::new(hits.into(), total.into())
    }

    #[test]
    fn error_probability_matches_enumeration() {
        for order in [5, 7, 11, 13, 17] {
            for n in 2..=4 {
                assert_eq!(bitwise_error_prob_exact(n, order).unwrap(), enumerate(n, order));
            }
        }
        assert!((bitwise_error_prob(2, 11).unwrap() - 0.1).abs() < 1e-15);
        assert!((bitwise_error_prob(3, 11).unwrap() - 0.09).abs() < 1e-15);
        assert_eq!(bitwise_error_prob(1, 11).unwrap(), 0.0);
        assert!(bitwise_error_prob(2, 2).is_err());
    }

    #[test]
    fn error_probability_bound() {
        for order in [3u64, 5, 101, 65537] {
            let bound = BigRational::new(BigInt::one(), BigInt::from(order - 1));
            for n in 1..=20 {
                assert!(bitwise_error_prob_exact(n, order).unwrap() <= bound);
            }
        }
    }

    #[test]
    fn influence() {
        let e = malicious_influence(70.0, 99, 1, 100.0, 0).unwrap();
        assert!((e - 0.0144).abs() < 1e-4, "{e}");
        assert_eq!(malicious_influence(70.0, 99, 0, 100.0, 0).unwrap(), 0.0);
        assert!(malicious_influence(70.0, 99, 3, 70.0, 3).unwrap() < 1e-15);
        assert!(malicious_influence(70.0, 0, 1, 1.0, 0).is_err());
    }
}
