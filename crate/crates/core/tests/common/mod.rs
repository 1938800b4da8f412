#![allow(dead_code)]

use std::collections::BTreeMap;

use pcgscreen::cepstral::CepstralConfig;
use pcgscreen::dataio::Label;
use pcgscreen::pipeline::{extract_channel, preprocess_recording, FeatureSpec, SubjectEpochs};
use pcgscreen::preprocess::PreprocessConfig;
use pcgscreen::selection::{ColumnInfo, FeatureMatrix};
use pcgscreen::synth::{synth_dataset, SynthParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Per-channel LFCC configurations for channels 2, 3, 6, 7.
pub fn table_lfcc_configs() -> BTreeMap<usize, CepstralConfig> {
    BTreeMap::from([
        (2, CepstralConfig::lfcc(108, 0, 7)),
        (3, CepstralConfig::lfcc(28, 0, 6)),
        (6, CepstralConfig::lfcc(20, 0, 4)),
        (7, CepstralConfig::lfcc(110, 0, 5)),
    ])
}

/// Grouped matrix: `n_per_class` subjects per label, three epochs each.
/// The first `informative` columns shift by `±shift / 2` with the label,
/// plus a per-subject offset; the rest are pure noise.
pub fn grouped_blobs(n_per_class: usize, informative: usize, noise: usize, shift: f64, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = informative + noise;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    let mut epochs = Vec::new();
    for s in 0..2 * n_per_class {
        let label = if s < n_per_class { Label::Cad } else { Label::Normal };
        let subject_offset: Vec<f64> = (0..d).map(|_| 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
        for e in 0..3 {
            let row = (0..d)
                .map(|j| {
                    let mu = if j < informative { label.sign() * shift / 2.0 } else { 0.0 };
                    mu + subject_offset[j] + rng.sample::<f64, _>(StandardNormal)
                })
                .collect();
            rows.push(row);
            labels.push(label);
            ids.push(format!("s{s:03}"));
            epochs.push(e);
        }
    }
    let columns = (0..d)
        .map(|j| ColumnInfo {
            channel: 1,
            name: format!("x{j}"),
        })
        .collect();
    FeatureMatrix::new(rows, labels, ids, epochs, columns).unwrap()
}

/// Preprocessed synthetic cohort held in memory.
pub fn synthetic_subjects(n_per_class: usize, params: &SynthParams, seed: u64) -> Vec<SubjectEpochs> {
    let ds = synth_dataset(n_per_class, params, seed).unwrap();
    let cfg = PreprocessConfig::default();
    ds.recordings
        .iter()
        .zip(&ds.manifest.entries)
        .map(|(rec, e)| preprocess_recording(rec, &ds.annotations, e.label, &cfg).unwrap())
        .collect()
}

/// Fused LFCC matrix over channels 2, 3, 6, 7.
pub fn fused_lfcc(subjects: &[SubjectEpochs]) -> FeatureMatrix {
    let parts: Vec<FeatureMatrix> = table_lfcc_configs()
        .iter()
        .map(|(&ch, cfg)| extract_channel(subjects, ch, &FeatureSpec::Cepstral(*cfg)).unwrap())
        .collect();
    let refs: Vec<&FeatureMatrix> = parts.iter().collect();
    FeatureMatrix::hconcat(&refs).unwrap()
}

/// Two-sided exact rank-sum p-value by enumerating every split of the pooled sample.
pub fn brute_force_rank_sum_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n_total = pooled.len();
    // midranks by direct counting
    let ranks: Vec<f64> = pooled
        .iter()
        .map(|&v| {
            let below = pooled.iter().filter(|&&u| u < v).count() as f64;
            let equal = pooled.iter().filter(|&&u| u == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = ranks[..a.len()].iter().sum();
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n_total) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let w: f64 = (0..n_total).filter(|&i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
        total += 1;
        if w <= observed + 1e-9 {
            le += 1;
        }
        if w >= observed - 1e-9 {
            ge += 1;
        }
    }
    (2.0 * le.min(ge) as f64 / total as f64).min(1.0)
}

/// Equal-frequency bins (ties share the bin of their first rank), written out independently.
pub fn oracle_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let n = values.len();
    values
        .iter()
        .map(|&v| {
            let first_rank = values.iter().filter(|&&u| u < v).count();
            first_rank * bins / n
        })
        .collect()
}

/// Mutual information in bits by explicit joint counting.
pub fn oracle_mi(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let mut joint: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut pa: BTreeMap<usize, f64> = BTreeMap::new();
    let mut pb: BTreeMap<usize, f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1.0;
        *pa.entry(x).or_default() += 1.0;
        *pb.entry(y).or_default() += 1.0;
    }
    joint
        .iter()
        .map(|(&(x, y), &c)| c / n * ((c / n) / ((pa[&x] / n) * (pb[&y] / n))).log2())
        .sum()
}
