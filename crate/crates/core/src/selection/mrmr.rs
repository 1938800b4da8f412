//! Minimum-redundancy maximum-relevance ranking (mutual-information difference).

use super::{FeatureMatrix, RankedFeatureSet, RankingMethod};
use crate::error::{Error, Result};

/// Equal-frequency discretization into at most `bins` levels.
///
/// Tied values always share a bin: a value's bin is determined by the rank of
/// the first element of its tie group.
pub fn equal_frequency_bins(values: &[f64], bins: usize) -> Vec<u8> {
    let n = values.len();
    let bins = bins.clamp(1, 255);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut out = vec![0u8; n];
    let mut group_start = 0;
    for (pos, &i) in idx.iter().enumerate() {
        if pos > 0 && values[i] != values[idx[pos - 1]] {
            group_start = pos;
        }
        out[i] = (group_start * bins / n.max(1)) as u8;
    }
    out
}

/// Mutual information in bits between two discrete sequences.
pub fn mutual_information(a: &[u8], b: &[u8]) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let ka = a.iter().copied().max().unwrap_or(0) as usize + 1;
    let kb = b.iter().copied().max().unwrap_or(0) as usize + 1;
    let mut joint = vec![0u32; ka * kb];
    let mut pa = vec![0u32; ka];
    let mut pb = vec![0u32; kb];
    for (&x, &y) in a.iter().zip(b) {
        joint[x as usize * kb + y as usize] += 1;
        pa[x as usize] += 1;
        pb[y as usize] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for x in 0..ka {
        for y in 0..kb {
            let c = joint[x * kb + y];
            if c > 0 {
                let c = c as f64;
                mi += c / nf * (c * nf / (pa[x] as f64 * pb[y] as f64)).log2();
            }
        }
    }
    mi.max(0.0)
}

/// Greedy MID ranking: first pick maximizes I(x; y); each later pick
/// maximizes I(x; y) minus the mean I(x; s) over already selected `s`.
/// Ties go to the lower column index.
pub fn mrmr_rank(fm: &FeatureMatrix, bins: usize) -> Result<RankedFeatureSet> {
    let d = fm.n_cols();
    if d == 0 || fm.n_rows() == 0 {
        return Err(Error::Empty("feature matrix"));
    }
    let y: Vec<u8> = fm.labels.iter().map(|l| l.is_cad() as u8).collect();
    let discrete: Vec<Vec<u8>> = (0..d)
        .map(|j| equal_frequency_bins(&fm.column(j), bins))
        .collect();
    let relevance: Vec<f64> = discrete.iter().map(|x| mutual_information(x, &y)).collect();

    let mut selected = vec![false; d];
    let mut redundancy = vec![0.0; d];
    let mut order = Vec::with_capacity(d);
    let mut scores = vec![0.0; d];

    for step in 0..d {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..d).filter(|&j| !selected[j]) {
            let score = if step == 0 {
                relevance[j]
            } else {
                relevance[j] - redundancy[j] / step as f64
            };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let (pick, score) = best.expect("unselected feature remains");
        selected[pick] = true;
        order.push(pick);
        scores[pick] = score;
        for j in (0..d).filter(|&j| !selected[j]) {
            redundancy[j] += mutual_information(&discrete[j], &discrete[pick]);
        }
    }
    Ok(RankedFeatureSet {
        order,
        scores,
        method: RankingMethod::Mrmr { bins },
    })
}
