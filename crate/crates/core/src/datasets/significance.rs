//! Paired sign-flip (approximate randomization) test.
//!
//! Under the null hypothesis the two systems are exchangeable within each
//! pair, so every per-pair difference is equally likely to carry either sign.
//! The p-value is the share of sign assignments whose mean difference is at
//! least as extreme as the observed one.

use rand::Rng;

use super::EvalError;
use crate::seed::{self, stage};

/// Largest `n` for which all `2^n` assignments are enumerated.
pub const EXACT_MAX_N: usize = 20;

const DEFAULT_SAMPLES: usize = 100_000;

fn differences(a: &[f64], b: &[f64]) -> Result<Vec<f64>, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
}

/// Sums within this distance of the observed sum count as ties.
fn tie_tolerance(diffs: &[f64]) -> f64 {
    1e-12 * diffs.iter().map(|d| d.abs()).sum::<f64>()
}

/// Two-sided paired sign-flip test. Exact for `n <= EXACT_MAX_N`; larger
/// inputs fall back to [`significance_test_sampled`] with a fixed seed.
pub fn significance_test(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    let diffs = differences(a, b)?;
    if diffs.len() > EXACT_MAX_N {
        return significance_test_sampled(a, b, DEFAULT_SAMPLES, 0);
    }
    let observed = diffs.iter().sum::<f64>().abs();
    let tol = tie_tolerance(&diffs);
    let n = diffs.len();
    let total = 1u64 << n;
    let mut extreme = 0u64;
    for mask in 0..total {
        let mut s = 0.0;
        for (i, d) in diffs.iter().enumerate() {
            if mask >> i & 1 == 1 {
                s -= d;
            } else {
                s += d;
            }
        }
        if s.abs() >= observed - tol {
            extreme += 1;
        }
    }
    Ok(extreme as f64 / total as f64)
}

/// Monte Carlo version: `(extreme + 1) / (samples + 1)` over random sign
/// assignments.
pub fn significance_test_sampled(
    a: &[f64],
    b: &[f64],
    samples: usize,
    seed: u64,
) -> Result<f64, EvalError> {
    let diffs = differences(a, b)?;
    let observed = diffs.iter().sum::<f64>().abs();
    let tol = tie_tolerance(&diffs);
    let mut rng = seed::rng(seed, &[stage::SIGTEST]);
    let mut extreme = 0usize;
    for _ in 0..samples {
        let s: f64 = diffs
            .iter()
            .map(|d| if rng.gen::<bool>() { *d } else { -d })
            .sum();
        if s.abs() >= observed - tol {
            extreme += 1;
        }
    }
    Ok((extreme + 1) as f64 / (samples + 1) as f64)
}
