use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataio::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    Euclidean,
    /// `1 - cos(x, z)`
    Cosine,
    Cityblock,
    /// `1 - pearson(x, z)` across features
    Correlation,
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceMetric::Euclidean => "euclidean",
            DistanceMetric::Cosine => "cosine",
            DistanceMetric::Cityblock => "cityblock",
            DistanceMetric::Correlation => "correlation",
        })
    }
}

fn one_minus_cos(dot: f64, na: f64, nb: f64) -> f64 {
    if na > 0.0 && nb > 0.0 {
        1.0 - dot / (na * nb).sqrt()
    } else {
        1.0
    }
}

impl DistanceMetric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            DistanceMetric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            DistanceMetric::Cityblock => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            DistanceMetric::Cosine => {
                let dot = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na = a.iter().map(|x| x * x).sum();
                let nb = b.iter().map(|x| x * x).sum();
                one_minus_cos(dot, na, nb)
            }
            DistanceMetric::Correlation => {
                let n = a.len() as f64;
                let ma = a.iter().sum::<f64>() / n;
                let mb = b.iter().sum::<f64>() / n;
                let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
                for (x, y) in a.iter().zip(b) {
                    dot += (x - ma) * (y - mb);
                    na += (x - ma) * (x - ma);
                    nb += (y - mb) * (y - mb);
                }
                one_minus_cos(dot, na, nb)
            }
        }
    }
}

/// Majority label among the `k` nearest rows, with the fraction of CAD votes.
///
/// Distance ties go to the lower training index; vote ties go to CAD.
pub fn knn_vote_from_distances(dist: &[f64], train_y: &[Label], k: usize) -> Result<(Label, f64)> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if k > train_y.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds {} training rows",
            train_y.len()
        )));
    }
    let mut idx: Vec<usize> = (0..dist.len()).collect();
    idx.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    let cad = idx[..k].iter().filter(|&&i| train_y[i].is_cad()).count();
    let label = if 2 * cad >= k { Label::Cad } else { Label::Normal };
    Ok((label, cad as f64 / k as f64))
}

pub fn knn_predict(
    train_x: &[Vec<f64>],
    train_y: &[Label],
    x: &[f64],
    k: usize,
    metric: DistanceMetric,
) -> Result<Label> {
    Ok(knn_predict_with_score(train_x, train_y, x, k, metric)?.0)
}

pub fn knn_predict_with_score(
    train_x: &[Vec<f64>],
    train_y: &[Label],
    x: &[f64],
    k: usize,
    metric: DistanceMetric,
) -> Result<(Label, f64)> {
    if let Some(row) = train_x.iter().find(|r| r.len() != x.len()) {
        return Err(Error::DimensionMismatch {
            expected: row.len(),
            got: x.len(),
        });
    }
    let dist: Vec<f64> = train_x.iter().map(|r| metric.distance(r, x)).collect();
    knn_vote_from_distances(&dist, train_y, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_with_k1() {
        let x = vec![vec![0.0, 0.0], vec![5.0, 5.0], vec![1.0, -1.0]];
        let y = vec![Label::Normal, Label::Cad, Label::Normal];
        assert_eq!(
            knn_predict(&x, &y, &[5.0, 5.0], 1, DistanceMetric::Euclidean).unwrap(),
            Label::Cad
        );
        assert!(knn_predict(&x, &y, &[5.0, 5.0], 0, DistanceMetric::Euclidean).is_err());
    }

    #[test]
    fn three_of_eleven_is_normal() {
        let dist: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let mut y = vec![Label::Normal; 11];
        y[0] = Label::Cad;
        y[4] = Label::Cad;
        y[9] = Label::Cad;
        assert_eq!(knn_vote_from_distances(&dist, &y, 11).unwrap().0, Label::Normal);
    }

    #[test]
    fn vote_tie_goes_to_cad() {
        let y = vec![Label::Cad, Label::Normal];
        assert_eq!(knn_vote_from_distances(&[1.0, 1.0], &y, 2).unwrap().0, Label::Cad);
    }

    #[test]
    fn cosine_is_scale_invariant() {
        let x: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i as f64).sin(), (i as f64 * 0.7).cos(), i as f64 * 0.1])
            .collect();
        let q = [0.3, -0.2, 0.9];
        let q2: Vec<f64> = q.iter().map(|v| v * 2.0).collect();
        let d1: Vec<f64> = x.iter().map(|r| DistanceMetric::Cosine.distance(r, &q)).collect();
        let d2: Vec<f64> = x.iter().map(|r| DistanceMetric::Cosine.distance(r, &q2)).collect();
        let rank = |d: &[f64]| {
            let mut i: Vec<usize> = (0..d.len()).collect();
            i.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
            i
        };
        assert_eq!(rank(&d1), rank(&d2));
    }
}
