//! Paired Wilcoxon signed-rank test, two-sided.
//!
//! Zero differences are dropped and tied magnitudes share their average rank.
//! Ranks are handled doubled so tied half-ranks stay integral, which lets the
//! exact null distribution be built by a subset-sum count.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest sample size (after dropping zero differences) evaluated exactly.
pub const EXACT_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignificanceResult {
    /// Signed-rank sum `W+ - W-`; positive when `a` tends to exceed `b`.
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
    /// Pairs with a nonzero difference.
    pub n: usize,
}

/// Doubled average ranks of `|d|` (1-based), in input order.
pub fn doubled_ranks(abs_diffs: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..abs_diffs.len()).collect();
    order.sort_by(|&a, &b| abs_diffs[a].total_cmp(&abs_diffs[b]));
    let mut ranks = vec![0u64; abs_diffs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && abs_diffs[order[end + 1]] == abs_diffs[order[start]] {
            end += 1;
        }
        // Positions start+1 ..= end+1 share rank (start + end + 2) / 2.
        let doubled = (start + end + 2) as u64;
        for &i in &order[start..=end] {
            ranks[i] = doubled;
        }
        start = end + 1;
    }
    ranks
}

pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)], level: f64) -> Result<SignificanceResult> {
    if pairs.is_empty() {
        return Err(Error::Precondition("Wilcoxon test needs at least one pair".into()));
    }
    if pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(Error::Precondition("Wilcoxon test needs finite values".into()));
    }
    let diffs: Vec<f64> = pairs.iter().map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(SignificanceResult {
            statistic: 0.0,
            p_value: 1.0,
            significant: false,
            n: 0,
        });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = doubled_ranks(&abs);
    let w_plus2: u64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total2: u64 = ranks.iter().sum();
    let statistic = (2.0 * w_plus2 as f64 - total2 as f64) / 2.0;

    let p_value = if n <= EXACT_MAX_N {
        exact_p_value(&ranks, w_plus2)
    } else {
        normal_p_value(&abs, w_plus2 as f64 / 2.0)
    };
    Ok(SignificanceResult {
        statistic,
        p_value,
        significant: p_value < level,
        n,
    })
}

/// Two-sided exact p-value: `min(1, 2 min(P(W+ <= w), P(W+ >= w)))` under
/// equiprobable sign assignments.
fn exact_p_value(doubled: &[u64], w_plus2: u64) -> f64 {
    let total: u64 = doubled.iter().sum();
    let mut counts = vec![0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in doubled {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let all: f64 = counts.iter().sum();
    let w = w_plus2 as usize;
    let lower: f64 = counts[..=w].iter().sum();
    let upper: f64 = counts[w..].iter().sum();
    (2.0 * lower.min(upper) / all).min(1.0)
}

/// Normal approximation with tie-corrected variance and continuity correction.
fn normal_p_value(abs: &[f64], w_plus: f64) -> f64 {
    let n = abs.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = abs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let variance = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if variance <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    let normal = Normal::standard();
    (2.0 * (1.0 - normal.cdf(z))).clamp(0.0, 1.0)
}
