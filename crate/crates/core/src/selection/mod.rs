//! Feature ranking (MRMR, ReliefF) and incremental dimension search.

mod matrix;
mod mrmr;
mod relieff;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::Metrics;

pub use matrix::{ColumnInfo, FeatureMatrix};
pub use mrmr::{equal_frequency_bins, mrmr_rank, mutual_information};
pub use relieff::{neighbour_weights, relieff_rank, relieff_weights};

/// Ranking algorithm and its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum RankingMethod {
    Mrmr { bins: usize },
    Relieff { k: usize },
    /// Keep the original column order.
    None,
}

impl RankingMethod {
    pub const MRMR_DEFAULT: RankingMethod = RankingMethod::Mrmr { bins: 10 };
    pub const RELIEFF_DEFAULT: RankingMethod = RankingMethod::Relieff { k: 100 };

    pub fn rank(&self, fm: &FeatureMatrix) -> Result<RankedFeatureSet> {
        match *self {
            RankingMethod::Mrmr { bins } => mrmr_rank(fm, bins),
            RankingMethod::Relieff { k } => relieff_rank(fm, k),
            RankingMethod::None => Ok(RankedFeatureSet {
                order: (0..fm.n_cols()).collect(),
                scores: vec![0.0; fm.n_cols()],
                method: RankingMethod::None,
            }),
        }
    }
}

/// A permutation of column indices (best first) plus per-column scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeatureSet {
    pub order: Vec<usize>,
    /// Indexed by column, not by rank.
    pub scores: Vec<f64>,
    pub method: RankingMethod,
}

impl RankedFeatureSet {
    pub fn top(&self, dim: usize) -> &[usize] {
        &self.order[..dim.min(self.order.len())]
    }

    pub fn is_permutation(&self) -> bool {
        let mut seen = vec![false; self.order.len()];
        self.order.iter().all(|&i| i < seen.len() && !std::mem::replace(&mut seen[i], true))
    }
}

/// Dimensions tried by the incremental search: `2, 4, ..., floor(D/2)*2`, then `D`.
pub fn incremental_dims(d: usize, step: usize) -> Vec<usize> {
    let step = step.max(1);
    let mut dims: Vec<usize> = (1..=d / step).map(|i| i * step).collect();
    if dims.last() != Some(&d) && d > 0 {
        dims.push(d);
    }
    dims
}

/// Outcome of an incremental search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_dim: usize,
    pub best_metrics: Metrics,
    /// `(dim, subject accuracy)` for every dimension tried.
    pub curve: Vec<(usize, f64)>,
}

/// Evaluate the top-`dim` ranked columns for each candidate dimension and
/// keep the one with the highest subject accuracy (smallest on ties).
pub fn incremental_search<F>(ranking: &RankedFeatureSet, step: usize, mut evaluator: F) -> Result<SearchResult>
where
    F: FnMut(&[usize]) -> Result<Metrics>,
{
    let dims = incremental_dims(ranking.order.len(), step);
    if dims.is_empty() {
        return Err(Error::Empty("ranking"));
    }
    let mut best: Option<(usize, Metrics)> = None;
    let mut curve = Vec::with_capacity(dims.len());
    for dim in dims {
        let m = evaluator(ranking.top(dim))?;
        curve.push((dim, m.acc));
        if best.as_ref().is_none_or(|(_, b)| m.acc > b.acc) {
            best = Some((dim, m));
        }
    }
    let (best_dim, best_metrics) = best.expect("at least one dimension");
    Ok(SearchResult {
        best_dim,
        best_metrics,
        curve,
    })
}
