use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataio::Label;
use crate::error::{Error, Result};

/// Seeded generator for one iteration: substream `seed + iteration`.
pub fn iteration_rng(seed: u64, iteration: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(iteration))
}

/// Fold index for every row. Subjects are shuffled per class and dealt
/// round-robin into `k` folds; every row of a subject inherits its fold.
pub fn stratified_group_kfold(subject_ids: &[String], labels: &[Label], k: usize, seed: u64) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    stratified_group_kfold_with(subject_ids, labels, k, &mut rng)
}

pub fn stratified_group_kfold_with(
    subject_ids: &[String],
    labels: &[Label],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be >= 2, got {k}")));
    }
    if subject_ids.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: subject_ids.len(),
            got: labels.len(),
        });
    }
    let mut subject_label: BTreeMap<&str, Label> = BTreeMap::new();
    for (s, &l) in subject_ids.iter().zip(labels) {
        if *subject_label.entry(s.as_str()).or_insert(l) != l {
            return Err(Error::InconsistentLabels(s.clone()));
        }
    }
    let mut fold_of: BTreeMap<&str, usize> = BTreeMap::new();
    let mut next = 0;
    for class in [Label::Cad, Label::Normal] {
        let mut members: Vec<&str> = subject_label
            .iter()
            .filter(|(_, &l)| l == class)
            .map(|(s, _)| *s)
            .collect();
        if members.len() < k {
            return Err(Error::TooFewSubjects {
                label: class.to_string(),
                found: members.len(),
                needed: k,
            });
        }
        members.shuffle(rng);
        for s in members {
            fold_of.insert(s, next % k);
            next += 1;
        }
    }
    Ok(subject_ids.iter().map(|s| fold_of[s.as_str()]).collect())
}
