mod common;

use common::brute_force_rank_sum_p;
use nalgebra::DMatrix;
use pcgscreen::dataio::Label;
use pcgscreen::learn::{
    compute_metrics, decision_to_probability, decode_model, encode_model, fit_platt, kernel_matrix, knn_predict,
    knn_vote_from_distances, load_model, rank_sum_test, save_model, svm_train, svm_train_with, Confusion,
    DistanceMetric, KernelSpec, Metrics, ProbabilityMap, RankSumMethod, SmoOptions,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn blobs(n_per_class: usize, d: usize, sep: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..2 * n_per_class {
        let label = if i % 2 == 0 { Label::Cad } else { Label::Normal };
        x.push(
            (0..d)
                .map(|j| {
                    let mu = if j == 0 { label.sign() * sep / 2.0 } else { 0.0 };
                    mu + rng.sample::<f64, _>(StandardNormal)
                })
                .collect(),
        );
        y.push(label);
    }
    (x, y)
}

fn kernels() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (0.05f64..2.0, 0.1f64..20.0).prop_map(|(g, c)| KernelSpec::rbf(Some(g), c)),
        (0.1f64..10.0).prop_map(KernelSpec::linear),
        (0.05f64..0.5, 0.1f64..5.0).prop_map(|(g, c)| KernelSpec::poly3(Some(g), 1.0, c)),
    ]
}

fn recording_opts() -> SmoOptions {
    SmoOptions {
        record_objective: true,
        ..SmoOptions::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn smo_output_is_dual_feasible_and_converged(
        seed in any::<u64>(),
        n in 5usize..30,
        d in 1usize..5,
        sep in 0.0f64..4.0,
        kernel in kernels(),
    ) {
        let (x, y) = blobs(n, d, sep, seed);
        let (_, report) = svm_train_with(&x, &y, &kernel, &recording_opts()).unwrap();
        let balance: f64 = report.alpha.iter().zip(&y).map(|(a, l)| a * l.sign()).sum();
        prop_assert!(balance.abs() < 1e-6);
        prop_assert!(report.alpha.iter().all(|&a| (0.0..=kernel.c).contains(&a)));
        prop_assert!(report.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        prop_assert!(report.duality_gap < 1e-2, "gap {}", report.duality_gap);
    }

    #[test]
    fn flipping_labels_negates_decisions(seed in any::<u64>(), n in 5usize..25, kernel in kernels()) {
        let (x, y) = blobs(n, 2, 1.5, seed);
        let flipped: Vec<Label> = y.iter().map(|l| l.flipped()).collect();
        let a = svm_train(&x, &y, &kernel).unwrap();
        let b = svm_train(&x, &flipped, &kernel).unwrap();
        for q in blobs(10, 2, 1.5, seed ^ 1).0 {
            let (da, db) = (a.decision(&q).unwrap(), b.decision(&q).unwrap());
            prop_assert!((da + db).abs() < 1e-2, "{} vs {}", da, db);
        }
    }

    #[test]
    fn row_order_does_not_change_predictions(seed in any::<u64>(), n in 5usize..25, kernel in kernels()) {
        let (x, y) = blobs(n, 3, 2.0, seed);
        let mut perm: Vec<usize> = (0..x.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let px: Vec<Vec<f64>> = perm.iter().map(|&i| x[i].clone()).collect();
        let py: Vec<Label> = perm.iter().map(|&i| y[i]).collect();
        let a = svm_train(&x, &y, &kernel).unwrap();
        let b = svm_train(&px, &py, &kernel).unwrap();
        for q in blobs(10, 3, 2.0, seed ^ 7).0 {
            let (da, db) = (a.decision(&q).unwrap(), b.decision(&q).unwrap());
            prop_assert!((da - db).abs() < 1e-2, "{} vs {}", da, db);
            // labels can only differ where both solutions sit inside the solver tolerance of zero
            if da.abs() > 1e-2 {
                prop_assert_eq!(a.predict(&q).unwrap(), b.predict(&q).unwrap());
            }
        }
    }

    #[test]
    fn rbf_gram_is_positive_semidefinite(seed in any::<u64>(), n in 2usize..40, d in 1usize..6, gamma in 0.01f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let k = kernel_matrix(&KernelSpec::rbf(Some(gamma), 1.0), gamma, &x);
        let m = DMatrix::from_row_slice(n, n, &k);
        prop_assert!((&m - m.transpose()).abs().max() < 1e-15);
        let min_eig = m.symmetric_eigenvalues().min();
        prop_assert!(min_eig >= -1e-8, "min eigenvalue {}", min_eig);
    }

    #[test]
    fn logistic_link_identities(d in -50.0f64..50.0, e in 0.001f64..10.0) {
        let p = decision_to_probability(d);
        prop_assert!(p > 0.0 && p < 1.0 || d.abs() > 36.0);
        prop_assert!((decision_to_probability(-d) - (1.0 - p)).abs() < 1e-12);
        prop_assert!(decision_to_probability(d + e) >= p);
    }

    #[test]
    fn rank_sum_matches_exhaustive_enumeration(
        a in prop::collection::vec(0i32..8, 3..7),
        b in prop::collection::vec(0i32..8, 3..7),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let t = rank_sum_test(&a, &b).unwrap();
        prop_assert_eq!(t.method, RankSumMethod::Exact);
        let oracle = brute_force_rank_sum_p(&a, &b);
        prop_assert!((t.p_value - oracle).abs() <= 1e-9 * oracle.max(1e-300), "{} vs {}", t.p_value, oracle);
        prop_assert!((rank_sum_test(&b, &a).unwrap().p_value - t.p_value).abs() < 1e-12);
    }

    #[test]
    fn label_swap_exchanges_sens_and_spec(truth in prop::collection::vec(any::<bool>(), 4..60), noise in prop::collection::vec(any::<bool>(), 60)) {
        prop_assume!(truth.iter().any(|&t| t) && truth.iter().any(|&t| !t));
        let lab = |b: bool| if b { Label::Cad } else { Label::Normal };
        let t: Vec<Label> = truth.iter().map(|&b| lab(b)).collect();
        let p: Vec<Label> = truth.iter().zip(&noise).map(|(&b, &flip)| lab(b ^ flip)).collect();
        let m = Metrics::from_predictions(&t, &p).unwrap();
        let tf: Vec<Label> = t.iter().map(|l| l.flipped()).collect();
        let pf: Vec<Label> = p.iter().map(|l| l.flipped()).collect();
        let s = Metrics::from_predictions(&tf, &pf).unwrap();
        prop_assert_eq!(m.sens, s.spec);
        prop_assert_eq!(m.spec, s.sens);
        prop_assert_eq!(m.acc, s.acc);
    }
}

#[test]
fn xor_is_learned_by_rbf() {
    let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
    let y = vec![Label::Cad, Label::Cad, Label::Normal, Label::Normal];
    let model = svm_train(&x, &y, &KernelSpec::rbf(Some(1.0), 10.0)).unwrap();
    for (xi, yi) in x.iter().zip(&y) {
        let d = model.decision(xi).unwrap();
        assert_eq!(d > 0.0, yi.is_cad(), "decision {d}");
    }
}

#[test]
fn separated_blobs_generalize_with_linear_kernel() {
    let (x, y) = blobs(100, 2, 8.0, 3);
    let model = svm_train(&x, &y, &KernelSpec::linear(1.0)).unwrap();
    let (tx, ty) = blobs(100, 2, 8.0, 4);
    let correct = tx.iter().zip(&ty).filter(|(q, l)| model.predict(q).unwrap() == **l).count();
    assert_eq!(correct, 200);
}

#[test]
fn free_support_vectors_sit_on_the_margin() {
    let (x, y) = blobs(30, 2, 2.0, 8);
    let kernel = KernelSpec::rbf(None, 1.0);
    let (model, report) = svm_train_with(&x, &y, &kernel, &SmoOptions::default()).unwrap();
    let mut free = 0;
    for ((xi, yi), &a) in x.iter().zip(&y).zip(&report.alpha) {
        if a > 1e-6 && a < kernel.c - 1e-6 {
            free += 1;
            let margin = yi.sign() * model.decision(xi).unwrap();
            assert!((margin - 1.0).abs() < 1e-2, "margin {margin}");
        }
    }
    assert!(free > 0);
    let far = vec![1e3, -1e3];
    assert!((model.decision(&far).unwrap() - model.bias).abs() < 1e-12);
}

#[test]
fn knn_examples() {
    let x: Vec<Vec<f64>> = (0..11).map(|i| vec![i as f64, 1.0 + (i % 3) as f64]).collect();
    let y: Vec<Label> = (0..11).map(|i| if i < 3 { Label::Cad } else { Label::Normal }).collect();
    for m in [DistanceMetric::Euclidean, DistanceMetric::Cityblock, DistanceMetric::Cosine] {
        assert_eq!(knn_predict(&x, &y, &x[1], 1, m).unwrap(), Label::Cad, "{m}");
    }
    assert_eq!(knn_predict(&x, &y, &[5.0, 2.0], 11, DistanceMetric::Euclidean).unwrap(), Label::Normal);
    // tied vote and tied distances
    let (label, frac) = knn_vote_from_distances(&[1.0, 1.0, 2.0, 2.0], &[Label::Cad, Label::Normal, Label::Normal, Label::Cad], 2).unwrap();
    assert_eq!((label, frac), (Label::Cad, 0.5));
    assert!(knn_predict(&x, &y, &x[0], 0, DistanceMetric::Euclidean).is_err());

    let q = [3.0, 7.0];
    let q2 = [6.0, 14.0];
    let order = |q: &[f64]| {
        let d: Vec<f64> = x.iter().map(|r| DistanceMetric::Cosine.distance(r, q)).collect();
        let mut idx: Vec<usize> = (0..d.len()).collect();
        idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
        idx
    };
    assert_eq!(order(&q), order(&q2));
}

#[test]
fn rank_sum_examples() {
    let a: Vec<f64> = (1..=10).map(f64::from).collect();
    let b: Vec<f64> = (11..=20).map(f64::from).collect();
    assert!(rank_sum_test(&a, &b).unwrap().p_value < 0.001);
    assert!(rank_sum_test(&a, &a).unwrap().p_value > 0.9);
    let big: Vec<f64> = (0..40).map(|i| (i * 7 % 13) as f64).collect();
    let t = rank_sum_test(&big, &big).unwrap();
    assert_eq!(t.method, RankSumMethod::Normal);
    assert!(t.p_value > 0.9);
    assert!(rank_sum_test(&[], &a).is_err());
}

#[test]
fn confusion_arithmetic() {
    let m = compute_metrics(&Confusion { tp: 3, fn_: 1, tn: 2, fp: 2 }).unwrap();
    assert_eq!((m.sens, m.spec, m.acc), (0.75, 0.5, 0.625));
    let m = compute_metrics(&Confusion { tp: 85, fp: 25, fn_: 15, tn: 75 }).unwrap();
    let prec = 85.0 / 110.0;
    let expect = 2.0 * prec * 0.85 / (prec + 0.85);
    assert!((m.f1 - expect).abs() < 1e-12);
    assert!((m.f1 - 0.8095).abs() < 5e-5);
    let all = compute_metrics(&Confusion { tp: 4, fp: 0, fn_: 0, tn: 6 }).unwrap();
    assert_eq!((all.sens, all.spec, all.acc, all.f1), (1.0, 1.0, 1.0, 1.0));
    let none = compute_metrics(&Confusion { tp: 0, fp: 0, fn_: 3, tn: 3 }).unwrap();
    assert_eq!(none.f1, 0.0);
    assert!(none.undefined.iter().any(|u| u == "precision"));
}

#[test]
fn platt_fit_is_monotone_and_calibrated_in_direction() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let labels: Vec<Label> = (0..200).map(|i| if i % 2 == 0 { Label::Cad } else { Label::Normal }).collect();
    let dec: Vec<f64> = labels.iter().map(|l| l.sign() + rng.sample::<f64, _>(StandardNormal)).collect();
    let map = fit_platt(&dec, &labels).unwrap();
    let ProbabilityMap::Platt { a, .. } = map else { panic!("expected Platt map") };
    assert!(a < 0.0);
    assert!(map.apply(2.0) > map.apply(0.0) && map.apply(0.0) > map.apply(-2.0));
    assert!(map.apply(3.0) > 0.8 && map.apply(-3.0) < 0.2);
}

#[test]
fn models_survive_serialization() {
    let (x, y) = blobs(20, 3, 2.0, 12);
    let model = svm_train(&x, &y, &KernelSpec::poly3(Some(0.2), 1.0, 2.0)).unwrap();
    let bytes = encode_model(&model);
    let back = decode_model(&bytes).unwrap();
    assert_eq!(back, model);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    save_model(&path, &model).unwrap();
    let loaded = load_model(&path).unwrap();
    for q in &x {
        assert_eq!(loaded.decision(q).unwrap().to_bits(), model.decision(q).unwrap().to_bits());
    }
    assert!(decode_model(&bytes[..bytes.len() / 2]).is_err());
    let mut wrong = bytes.clone();
    wrong[0] ^= 0xff;
    assert!(decode_model(&wrong).is_err());
}
