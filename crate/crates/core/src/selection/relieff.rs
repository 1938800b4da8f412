//! ReliefF feature weighting with rank-weighted neighbours.

use super::{FeatureMatrix, RankedFeatureSet, RankingMethod};
use crate::error::{Error, Result};

/// Influence of the `r`-th nearest neighbour (1-based) among `k`:
/// `(k - r + 1) / (k (k + 1) / 2)`, so weights sum to one and decay with rank.
pub fn neighbour_weights(k: usize) -> Vec<f64> {
    let total = (k * (k + 1)) as f64 / 2.0;
    (1..=k).map(|r| (k - r + 1) as f64 / total).collect()
}

fn zscore_columns(fm: &FeatureMatrix) -> Vec<Vec<f64>> {
    let n = fm.n_rows();
    let d = fm.n_cols();
    let mut mean = vec![0.0; d];
    let mut sd = vec![0.0; d];
    for row in fm.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    for row in fm.rows() {
        for j in 0..d {
            sd[j] += (row[j] - mean[j]).powi(2);
        }
    }
    sd.iter_mut().for_each(|s| *s = (*s / n as f64).sqrt());
    fm.rows()
        .map(|row| {
            (0..d)
                .map(|j| if sd[j] > 0.0 { (row[j] - mean[j]) / sd[j] } else { 0.0 })
                .collect()
        })
        .collect()
}

/// ReliefF weights, one per column.
///
/// For each instance, range-normalized feature differences to its `k` nearest
/// same-class neighbours are subtracted and those to its `k` nearest
/// other-class neighbours added, each scaled by the neighbour's rank weight.
/// The total is divided by the number of instances. Neighbours are found by
/// Euclidean distance over z-scored features; distance ties go to the lower
/// row index. `k` is clamped to one less than the smallest class size.
pub fn relieff_weights(fm: &FeatureMatrix, k: usize) -> Result<Vec<f64>> {
    let n = fm.n_rows();
    let d = fm.n_cols();
    if n == 0 || d == 0 {
        return Err(Error::Empty("feature matrix"));
    }
    let n_cad = fm.labels.iter().filter(|l| l.is_cad()).count();
    let min_class = n_cad.min(n - n_cad);
    if min_class == 0 {
        return Err(Error::SingleClass);
    }
    let k_eff = k.min(min_class.saturating_sub(1)).max(1).min(min_class);
    if k_eff < k {
        log::info!("ReliefF: k clamped from {k} to {k_eff} (smallest class has {min_class})");
    }
    let weights = neighbour_weights(k_eff);

    let mut range = vec![0.0; d];
    for (j, r) in range.iter_mut().enumerate() {
        let (lo, hi) = (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
            let v = fm.get(i, j);
            (lo.min(v), hi.max(v))
        });
        *r = hi - lo;
    }
    let inv_range: Vec<f64> = range
        .iter()
        .map(|&r| if r > 0.0 { 1.0 / r } else { 0.0 })
        .collect();

    let z = zscore_columns(fm);
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for m in i + 1..n {
            let s: f64 = z[i].iter().zip(&z[m]).map(|(a, b)| (a - b) * (a - b)).sum();
            dist[i * n + m] = s;
            dist[m * n + i] = s;
        }
    }

    let mut w = vec![0.0; d];
    let mut hits: Vec<usize> = Vec::with_capacity(n);
    let mut misses: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        hits.clear();
        misses.clear();
        for m in (0..n).filter(|&m| m != i) {
            if fm.labels[m] == fm.labels[i] {
                hits.push(m);
            } else {
                misses.push(m);
            }
        }
        let by_dist = |a: &usize, b: &usize| {
            dist[i * n + a]
                .total_cmp(&dist[i * n + b])
                .then(a.cmp(b))
        };
        hits.sort_by(by_dist);
        misses.sort_by(by_dist);
        let xi = fm.row(i);
        for (set, sign) in [(&hits, -1.0), (&misses, 1.0)] {
            for (&m, &wr) in set.iter().take(k_eff).zip(&weights) {
                let xm = fm.row(m);
                let c = sign * wr;
                for j in 0..d {
                    w[j] += c * (xi[j] - xm[j]).abs() * inv_range[j];
                }
            }
        }
    }
    let nf = n as f64;
    w.iter_mut().for_each(|v| *v /= nf);
    Ok(w)
}

/// Columns ordered by decreasing ReliefF weight (ties to lower index).
pub fn relieff_rank(fm: &FeatureMatrix, k: usize) -> Result<RankedFeatureSet> {
    let scores = relieff_weights(fm, k)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(RankedFeatureSet {
        order,
        scores,
        method: RankingMethod::Relieff { k },
    })
}
