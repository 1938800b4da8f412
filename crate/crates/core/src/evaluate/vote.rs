use serde::{Deserialize, Serialize};

use crate::dataio::{Label, EPOCHS_PER_SUBJECT};
use crate::error::{Error, Result};
use crate::selection::FeatureMatrix;

/// Subject label from its epoch predictions.
///
/// Strict mode requires exactly three epochs; otherwise any odd count is accepted.
pub fn majority_vote(labels: &[Label], strict: bool) -> Result<Label> {
    let n = labels.len();
    let ok = if strict { n == EPOCHS_PER_SUBJECT } else { n % 2 == 1 };
    if !ok {
        return Err(Error::ExpectedThreeEpochs {
            subject: String::new(),
            found: n,
        });
    }
    let cad = labels.iter().filter(|l| l.is_cad()).count();
    Ok(if 2 * cad > n { Label::Cad } else { Label::Normal })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectVote {
    pub subject_id: String,
    pub truth: Label,
    pub predicted: Label,
    pub epochs: Vec<Label>,
}

/// Group row predictions by subject (first-appearance order) and vote.
pub fn vote_subjects(subject_ids: &[String], truth: &[Label], preds: &[Label], strict: bool) -> Result<Vec<SubjectVote>> {
    let mut out: Vec<SubjectVote> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for ((s, &t), &p) in subject_ids.iter().zip(truth).zip(preds) {
        let at = *index.entry(s.as_str()).or_insert_with(|| {
            out.push(SubjectVote {
                subject_id: s.clone(),
                truth: t,
                predicted: t,
                epochs: Vec::new(),
            });
            out.len() - 1
        });
        out[at].epochs.push(p);
    }
    for v in &mut out {
        v.predicted = majority_vote(&v.epochs, strict).map_err(|e| match e {
            Error::ExpectedThreeEpochs { found, .. } => Error::ExpectedThreeEpochs {
                subject: v.subject_id.clone(),
                found,
            },
            e => e,
        })?;
    }
    Ok(out)
}

/// Mean probability across channels; CAD iff the mean is at least 0.5.
pub fn score_level_fuse(probs: &[f64]) -> Result<(Label, f64)> {
    if probs.is_empty() {
        return Err(Error::Empty("channel probabilities"));
    }
    let p = probs.iter().sum::<f64>() / probs.len() as f64;
    Ok((if p >= 0.5 { Label::Cad } else { Label::Normal }, p))
}

/// Column-wise concatenation of row-aligned per-channel matrices.
pub fn feature_level_fuse(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix> {
    FeatureMatrix::hconcat(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    #[test]
    fn two_of_three() {
        assert_eq!(majority_vote(&[Cad, Cad, Normal], true).unwrap(), Cad);
        assert_eq!(majority_vote(&[Normal, Normal, Normal], true).unwrap(), Normal);
        let err = majority_vote(&[Cad, Normal], true).unwrap_err();
        assert!(err.to_string().contains("expected 3 epochs"));
        assert_eq!(majority_vote(&[Cad, Cad, Normal, Normal, Cad], false).unwrap(), Cad);
        assert!(majority_vote(&[Cad, Cad, Normal, Normal, Cad], true).is_err());
    }

    #[test]
    fn score_fusion() {
        let (l, p) = score_level_fuse(&[0.9, 0.2]).unwrap();
        assert_eq!(l, Cad);
        assert!((p - 0.55).abs() < 1e-15);
        assert_eq!(score_level_fuse(&[0.5, 0.5]).unwrap().0, Cad);
        assert_eq!(score_level_fuse(&[0.3; 4]).unwrap().1, 0.3);
        assert!(score_level_fuse(&[]).is_err());
    }

    #[test]
    fn votes_by_subject() {
        let ids: Vec<String> = ["a", "a", "a", "b", "b", "b"].iter().map(|s| s.to_string()).collect();
        let truth = [Cad, Cad, Cad, Normal, Normal, Normal];
        let pred = [Cad, Normal, Cad, Cad, Normal, Normal];
        let v = vote_subjects(&ids, &truth, &pred, true).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!((v[0].predicted, v[1].predicted), (Cad, Normal));
    }
}
