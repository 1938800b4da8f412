//! Wilcoxon rank-sum test.
//!
//! Small samples use the exact permutation distribution of the rank sum
//! (conditioned on the observed tie pattern). Larger samples use the normal
//! approximation with tie-corrected variance and continuity correction.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Pooled sizes up to this use the exact distribution.
pub const EXACT_MAX_TOTAL: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankSumMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSumTest {
    /// Sum of the midranks of the first sample.
    pub statistic: f64,
    pub p_value: f64,
    pub method: RankSumMethod,
}

/// Midranks of `values` (1-based, ties averaged).
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            ranks[t] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided p-value of the rank-sum test for `a` against `b`.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(rank_sum_test(a, b)?.p_value)
}

pub fn rank_sum_test(a: &[f64], b: &[f64]) -> Result<RankSumTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("rank-sum sample"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let (n, m) = (a.len(), b.len());
    let w: f64 = ranks[..n].iter().sum();
    if n + m <= EXACT_MAX_TOTAL {
        Ok(RankSumTest {
            statistic: w,
            p_value: exact_p(&ranks, n),
            method: RankSumMethod::Exact,
        })
    } else {
        Ok(RankSumTest {
            statistic: w,
            p_value: normal_p(&ranks, n, w),
            method: RankSumMethod::Normal,
        })
    }
}

fn exact_p(ranks: &[f64], n: usize) -> f64 {
    // doubled midranks are integers
    let r2: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let w2: usize = r2[..n].iter().sum();
    let max_sum: usize = r2.iter().sum();
    // counts[j][s]: subsets of size j with doubled rank sum s
    let mut counts = vec![vec![0.0f64; max_sum + 1]; n + 1];
    counts[0][0] = 1.0;
    for &r in &r2 {
        for j in (1..=n).rev() {
            let (lo, hi) = counts.split_at_mut(j);
            let prev = &lo[j - 1];
            let cur = &mut hi[0];
            for s in (r..=max_sum).rev() {
                if prev[s - r] != 0.0 {
                    cur[s] += prev[s - r];
                }
            }
        }
    }
    let dist = &counts[n];
    let total: f64 = dist.iter().sum();
    let lower: f64 = dist[..=w2].iter().sum();
    let upper: f64 = dist[w2..].iter().sum();
    (2.0 * lower.min(upper) / total).min(1.0)
}

fn normal_p(ranks: &[f64], n: usize, w: f64) -> f64 {
    let total = ranks.len();
    let m = total - n;
    let big_n = total as f64;
    let mean = n as f64 * (big_n + 1.0) / 2.0;
    let mut sorted = ranks.to_vec();
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
    let var = n as f64 * m as f64 / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let diff = w - mean;
    let z = (diff - 0.5 * diff.signum()).abs().max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}
