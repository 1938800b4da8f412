mod common;

use common::{grouped_blobs, oracle_bins, oracle_mi};
use pcgscreen::dataio::Label;
use pcgscreen::evaluate::{evaluate_split, stratified_group_kfold};
use pcgscreen::learn::{Classifier, KernelSpec};
use pcgscreen::selection::{
    equal_frequency_bins, incremental_dims, incremental_search, mrmr_rank, mutual_information, relieff_rank,
    relieff_weights, FeatureMatrix, RankingMethod,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn matrix(rows: Vec<Vec<f64>>, labels: Vec<Label>) -> FeatureMatrix {
    let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
    FeatureMatrix::from_rows(rows, labels, ids).unwrap()
}

fn labels_from_bits(bits: &[bool]) -> Vec<Label> {
    bits.iter().map(|&b| if b { Label::Cad } else { Label::Normal }).collect()
}

fn random_matrix(seed: u64, n: usize, d: usize) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<Label> = (0..n).map(|i| if i % 2 == 0 { Label::Cad } else { Label::Normal }).collect();
    let rows = labels
        .iter()
        .map(|l| {
            (0..d)
                .map(|j| {
                    let signal = if j % 3 == 0 { l.sign() * 0.4 * (j as f64 + 1.0) } else { 0.0 };
                    // coarse grid so that value ties occur
                    ((signal + rng.random_range(-2.0..2.0)) * 4.0).round() / 4.0
                })
                .collect()
        })
        .collect();
    matrix(rows, labels)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn binning_and_mi_match_counting_oracle(values in prop::collection::vec(-5i32..5, 5..80), bins in 2usize..12) {
        let x: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        let ours: Vec<usize> = equal_frequency_bins(&x, bins).into_iter().map(usize::from).collect();
        prop_assert_eq!(&ours, &oracle_bins(&x, bins));
        let y: Vec<usize> = values.iter().map(|v| (v.rem_euclid(3)) as usize).collect();
        let a: Vec<u8> = ours.iter().map(|&v| v as u8).collect();
        let b: Vec<u8> = y.iter().map(|&v| v as u8).collect();
        prop_assert!((mutual_information(&a, &b) - oracle_mi(&ours, &y)).abs() < 1e-12);
    }

    #[test]
    fn mrmr_follows_greedy_mid_oracle(seed in any::<u64>(), n in 20usize..60, d in 1usize..=12) {
        let fm = random_matrix(seed, n, d);
        let ranked = mrmr_rank(&fm, 10).unwrap();
        prop_assert!(ranked.is_permutation());

        let y: Vec<usize> = fm.labels.iter().map(|l| l.is_cad() as usize).collect();
        let disc: Vec<Vec<usize>> = (0..d).map(|j| oracle_bins(&fm.column(j), 10)).collect();
        let rel: Vec<f64> = disc.iter().map(|x| oracle_mi(x, &y)).collect();
        let mut chosen: Vec<usize> = Vec::new();
        for &pick in &ranked.order {
            let score = |j: usize| {
                if chosen.is_empty() {
                    rel[j]
                } else {
                    rel[j] - chosen.iter().map(|&s| oracle_mi(&disc[j], &disc[s])).sum::<f64>() / chosen.len() as f64
                }
            };
            let best = (0..d).filter(|j| !chosen.contains(j)).map(score).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(score(pick) >= best - 1e-9);
            chosen.push(pick);
        }
        let top = (0..d).map(|j| rel[j]).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((rel[ranked.order[0]] - top).abs() < 1e-12);
    }

    #[test]
    fn relieff_symmetries(seed in any::<u64>(), scale in 0.01f64..100.0, col in 0usize..4) {
        let fm = random_matrix(seed, 40, 4);
        let w = relieff_weights(&fm, 10).unwrap();
        let flipped = relieff_weights(&fm.with_flipped_labels(), 10).unwrap();
        for (a, b) in w.iter().zip(&flipped) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let rows = fm
            .to_rows()
            .into_iter()
            .map(|mut r| {
                r[col] *= scale;
                r
            })
            .collect();
        let scaled = relieff_weights(&matrix(rows, fm.labels.clone()), 10).unwrap();
        for (a, b) in w.iter().zip(&scaled) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        let ranked = relieff_rank(&fm, 10).unwrap();
        prop_assert!(ranked.is_permutation());
        let ordered: Vec<f64> = ranked.order.iter().map(|&j| ranked.scores[j]).collect();
        prop_assert!(ordered.windows(2).all(|p| p[0] >= p[1]));
    }
}

#[test]
fn duplicate_of_first_pick_drops_behind_useful_features() {
    // 20 rows: x0 is y with two errors, x1 duplicates x0, x2 is a noisier
    // four-level view of y whose errors differ from those of x0
    let y: Vec<usize> = (0..20).map(|i| i % 2).collect();
    let x0: Vec<usize> = y.iter().enumerate().map(|(i, &v)| if i < 2 { 1 - v } else { v }).collect();
    let x2 = vec![2, 1, 1, 1, 0, 1, 0, 1, 0, 1, 0, 3, 2, 1, 0, 1, 1, 2, 0, 1];
    let rows = (0..20).map(|i| vec![x0[i] as f64, x0[i] as f64, x2[i] as f64]).collect();
    let labels = y.iter().map(|&v| if v == 1 { Label::Cad } else { Label::Normal }).collect();
    let ranked = mrmr_rank(&matrix(rows, labels), 10).unwrap();

    let marginal_x2 = oracle_mi(&x2, &y) - oracle_mi(&x2, &x0);
    let marginal_x1 = oracle_mi(&x0, &y) - oracle_mi(&x0, &x0);
    assert!(oracle_mi(&x0, &y) > oracle_mi(&x2, &y));
    assert!(marginal_x2 > 0.0 && marginal_x1 < 0.0);
    assert_eq!(ranked.order, vec![0, 2, 1]);
    assert!((ranked.scores[0] - oracle_mi(&x0, &y)).abs() < 1e-12);
    assert!((ranked.scores[2] - marginal_x2).abs() < 1e-12);
    let mean_third = oracle_mi(&x0, &y) - (oracle_mi(&x0, &x0) + oracle_mi(&x0, &x2)) / 2.0;
    assert!((ranked.scores[1] - mean_third).abs() < 1e-12);
}

#[test]
fn noise_has_negligible_relevance() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 1000;
    let labels: Vec<Label> = (0..n).map(|_| if rng.random::<bool>() { Label::Cad } else { Label::Normal }).collect();
    let rows = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    let fm = matrix(rows, labels);
    let y: Vec<u8> = fm.labels.iter().map(|l| l.is_cad() as u8).collect();
    for j in 0..2 {
        let mi = mutual_information(&equal_frequency_bins(&fm.column(j), 10), &y);
        assert!(mi < 0.05, "column {j}: {mi} bits");
    }
    let w = relieff_weights(&grouped_blobs(250, 1, 3, 3.0, 5), 100).unwrap();
    assert!(w[0] > 0.1, "informative weight {}", w[0]);
    for (j, v) in w.iter().enumerate().skip(1) {
        assert!(v.abs() < 0.05, "noise column {j}: {v}");
    }
}

#[test]
fn relieff_small_hand_set() {
    // six points, k = 2: column 0 separates the classes, column 1 is constant,
    // column 2 alternates independently of the class
    let labels = labels_from_bits(&[true, true, true, false, false, false]);
    let rows = vec![
        vec![0.0, 5.0, 0.0],
        vec![0.1, 5.0, 1.0],
        vec![0.2, 5.0, 0.0],
        vec![1.0, 5.0, 1.0],
        vec![1.1, 5.0, 0.0],
        vec![1.2, 5.0, 1.0],
    ];
    let w = relieff_weights(&matrix(rows, labels), 2).unwrap();
    assert_eq!(w[1], 0.0);
    assert!(w[0] > 0.0);
    assert!(w[0] > w[2]);
}

#[test]
fn dimension_grid() {
    assert_eq!(incremental_dims(5, 2), vec![2, 4, 5]);
    assert_eq!(incremental_dims(6, 2), vec![2, 4, 6]);
    assert_eq!(incremental_dims(1, 2), vec![1]);
}

fn svm() -> Classifier {
    Classifier::svm(KernelSpec::rbf(None, 1.0))
}

/// Two class-separating columns followed by subject-level noise columns,
/// which voting over epochs cannot average away.
fn prefix_informative(n_per_class: usize, noise: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut rows, mut labels, mut ids) = (Vec::new(), Vec::new(), Vec::new());
    for s in 0..2 * n_per_class {
        let label = if s % 2 == 0 { Label::Cad } else { Label::Normal };
        let subject_noise: Vec<f64> = (0..noise).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..3 {
            let mut row: Vec<f64> = (0..2).map(|_| label.sign() * 1.5 + 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
            row.extend(subject_noise.iter().map(|v| v + 0.05 * rng.sample::<f64, _>(StandardNormal)));
            rows.push(row);
            labels.push(label);
            ids.push(format!("s{s}"));
        }
    }
    FeatureMatrix::from_rows(rows, labels, ids).unwrap()
}

#[test]
fn search_stops_at_the_informative_prefix() {
    let fm = prefix_informative(40, 60, 23);
    let folds = stratified_group_kfold(&fm.subject_ids, &fm.labels, 2, 3).unwrap();
    let train: Vec<usize> = (0..fm.n_rows()).filter(|&r| folds[r] != 0).collect();
    let valid: Vec<usize> = (0..fm.n_rows()).filter(|&r| folds[r] == 0).collect();
    let ranking = RankingMethod::None.rank(&fm).unwrap();
    let result = incremental_search(&ranking, 2, |cols| evaluate_split(&fm, &train, &valid, cols, &svm(), true)).unwrap();
    assert_eq!(result.best_dim, 2);
    assert_eq!(result.curve.len(), 31);
    let (first, last) = (result.curve[0].1, result.curve.last().unwrap().1);
    assert!(last < first, "accuracy {first} at 2 dims, {last} at all");
}

#[test]
fn pure_noise_stays_near_chance_at_every_dim() {
    let fm = grouped_blobs(50, 0, 8, 0.0, 31);
    let folds = stratified_group_kfold(&fm.subject_ids, &fm.labels, 5, 1).unwrap();
    let ranking = RankingMethod::None.rank(&fm).unwrap();
    for dim in incremental_dims(8, 2) {
        let accs: Vec<f64> = (0..5)
            .map(|f| {
                let train: Vec<usize> = (0..fm.n_rows()).filter(|&r| folds[r] != f).collect();
                let valid: Vec<usize> = (0..fm.n_rows()).filter(|&r| folds[r] == f).collect();
                evaluate_split(&fm, &train, &valid, ranking.top(dim), &svm(), true).unwrap().acc
            })
            .collect();
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        assert!((mean - 0.5).abs() <= 0.1, "dim {dim}: {mean}");
    }
}
