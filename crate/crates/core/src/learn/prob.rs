use serde::{Deserialize, Serialize};

use crate::dataio::Label;
use crate::error::{Error, Result};

/// Logistic link `1 / (1 + exp(-d))`.
pub fn decision_to_probability(d: f64) -> f64 {
    if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        let e = d.exp();
        e / (1.0 + e)
    }
}

/// Map from a decision value to P(CAD).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProbabilityMap {
    Logistic,
    /// `1 / (1 + exp(a d + b))`, fitted by Platt's method.
    Platt { a: f64, b: f64 },
}

impl Default for ProbabilityMap {
    fn default() -> Self {
        ProbabilityMap::Logistic
    }
}

impl ProbabilityMap {
    pub fn apply(&self, d: f64) -> f64 {
        match *self {
            ProbabilityMap::Logistic => decision_to_probability(d),
            ProbabilityMap::Platt { a, b } => decision_to_probability(-(a * d + b)),
        }
    }
}

/// Fit Platt sigmoid parameters by Newton's method with backtracking
/// (Lin, Lin & Weng's formulation with smoothed targets).
pub fn fit_platt(decisions: &[f64], labels: &[Label]) -> Result<ProbabilityMap> {
    if decisions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: decisions.len(),
            got: labels.len(),
        });
    }
    let prior1 = labels.iter().filter(|l| l.is_cad()).count() as f64;
    let prior0 = labels.len() as f64 - prior1;
    if prior1 == 0.0 || prior0 == 0.0 {
        return Err(Error::SingleClass);
    }
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = labels.iter().map(|l| if l.is_cad() { hi } else { lo }).collect();
    let (min_step, sigma) = (1e-10, 1e-12);
    let mut a = 0.0;
    let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();

    let fval = |a: f64, b: f64| -> f64 {
        decisions
            .iter()
            .zip(&t)
            .map(|(&d, &ti)| {
                let f = d * a + b;
                if f >= 0.0 {
                    ti * f + (1.0 + (-f).exp()).ln()
                } else {
                    (ti - 1.0) * f + (1.0 + f.exp()).ln()
                }
            })
            .sum()
    };
    let mut fv = fval(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
        for (&d, &ti) in decisions.iter().zip(&t) {
            let f = d * a + b;
            let (p, q) = if f >= 0.0 {
                let e = (-f).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = f.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += d * d * d2;
            h22 += d2;
            h21 += d * d2;
            let d1 = ti - p;
            g1 += d * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= min_step {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = fval(na, nb);
            if nf < fv + 1e-4 * step * gd {
                a = na;
                b = nb;
                fv = nf;
                break;
            }
            step /= 2.0;
        }
        if step < min_step {
            break;
        }
    }
    Ok(ProbabilityMap::Platt { a, b })
}
