//! Two-sided Wilcoxon rank-sum test.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Combined sizes up to this use exact enumeration.
pub const EXACT_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSumResult {
    /// Sum of the midranks of the first sample.
    pub statistic: f64,
    pub p_value: f64,
    pub exact: bool,
}

/// Midranks (1-based) of the pooled values.
fn midranks(pooled: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn exact_p(ranks: &[f64], na: usize, observed_dev: f64, expected: f64) -> f64 {
    let n = ranks.len();
    let (mut extreme, mut total) = (0u64, 0u64);
    // Enumerate every size-`na` subset as a bitmask.
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        total += 1;
        if (w - expected).abs() >= observed_dev - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / total as f64
}

fn normal_p(ranks: &[f64], na: usize, nb: usize, observed_dev: f64) -> f64 {
    let n = (na + nb) as f64;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|r| **r == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = na as f64 * nb as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((observed_dev - 0.5).max(0.0)) / var.sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    (2.0 * std_normal.sf(z)).min(1.0)
}

/// Two-sided rank-sum test of `a` against `b`. Exact permutation p-value
/// when the pooled size is at most [`EXACT_LIMIT`], otherwise the normal
/// approximation with tie and continuity corrections. When every pooled
/// value is tied the p-value is 1.
pub fn rank_sum_test(a: &[f64], b: &[f64]) -> Result<RankSumResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("rank-sum test needs two nonempty samples"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("rank-sum samples"));
    }
    rank_sum_with(a, b, a.len() + b.len() <= EXACT_LIMIT)
}

pub(crate) fn rank_sum_with(a: &[f64], b: &[f64], exact: bool) -> Result<RankSumResult> {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let (na, nb) = (a.len(), b.len());
    let statistic: f64 = ranks[..na].iter().sum();
    let expected = na as f64 * (na + nb + 1) as f64 / 2.0;
    let dev = (statistic - expected).abs();
    let p_value = if pooled.iter().all(|v| *v == pooled[0]) {
        1.0
    } else if exact {
        exact_p(&ranks, na, dev, expected)
    } else {
        normal_p(&ranks, na, nb, dev)
    };
    Ok(RankSumResult {
        statistic,
        p_value,
        exact,
    })
}
