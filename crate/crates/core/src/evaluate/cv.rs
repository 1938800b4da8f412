use std::collections::{BTreeMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_pipeline, FitConfig};
use super::folds::{iteration_rng, stratified_group_kfold_with};
use super::vote::{score_level_fuse, vote_subjects, SubjectVote};
use crate::dataio::Label;
use crate::error::{Error, Result};
use crate::learn::{compute_metrics, Confusion, Metrics};
use crate::selection::FeatureMatrix;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Repeated subject-grouped k-fold protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub k: usize,
    pub iterations: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub fit: FitConfig,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: 5,
            iterations: 20,
            seed: 0,
            fit: FitConfig::default(),
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidParameter(format!("k must be >= 2, got {}", self.k)));
        }
        if self.iterations < 1 {
            return Err(Error::InvalidParameter("iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    FeatureLevel,
    ScoreLevel,
}

/// One trained model of the protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTrace {
    pub iteration: usize,
    pub fold: usize,
    pub n_train_subjects: usize,
    pub n_test_subjects: usize,
    /// Selected feature dimension (summed over channels for score-level fusion).
    pub dim: usize,
    pub epoch: Metrics,
    pub subject: Metrics,
}

/// Means over the per-model metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub sens: f64,
    pub spec: f64,
    pub acc: f64,
    pub f1: f64,
    pub precision: f64,
    pub sens_spec: f64,
    pub acc_std: f64,
    pub n_models: usize,
}

impl MetricSummary {
    pub fn from_metrics<'a>(ms: impl IntoIterator<Item = &'a Metrics>) -> MetricSummary {
        let ms: Vec<&Metrics> = ms.into_iter().collect();
        let n = ms.len().max(1) as f64;
        let mean = |f: fn(&Metrics) -> f64| ms.iter().map(|m| f(m)).sum::<f64>() / n;
        let acc = mean(|m| m.acc);
        let acc_var = ms.iter().map(|m| (m.acc - acc).powi(2)).sum::<f64>() / n;
        MetricSummary {
            sens: mean(|m| m.sens),
            spec: mean(|m| m.spec),
            acc,
            f1: mean(|m| m.f1),
            precision: mean(|m| m.precision),
            sens_spec: mean(|m| m.sens_spec()),
            acc_std: acc_var.sqrt(),
            n_models: ms.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub config: CvConfig,
    pub mode: FusionMode,
    pub n_subjects: usize,
    pub n_epochs: usize,
    pub n_features: usize,
    pub epoch_metrics: MetricSummary,
    pub subject_metrics: MetricSummary,
    /// Median of the per-model selected dimensions.
    pub fd_selected: f64,
    pub models: Vec<ModelTrace>,
}

struct FoldOutput {
    preds: Vec<Label>,
    dim: usize,
}

fn median(mut v: Vec<usize>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}

fn check_disjoint(fm: &FeatureMatrix, train: &[usize], test: &[usize]) -> Result<(usize, usize)> {
    let tr: HashSet<&str> = train.iter().map(|&r| fm.subject_ids[r].as_str()).collect();
    let te: HashSet<&str> = test.iter().map(|&r| fm.subject_ids[r].as_str()).collect();
    if let Some(s) = te.iter().find(|s| tr.contains(*s)) {
        return Err(Error::Leakage(s.to_string()));
    }
    Ok((tr.len(), te.len()))
}

fn fold_rng(cfg: &CvConfig, iteration: usize, fold: usize) -> ChaCha8Rng {
    let mut rng = iteration_rng(cfg.seed, iteration as u64);
    rng.set_stream(fold as u64 + 1);
    rng
}

/// Shared driver: builds folds per iteration, runs `fold_fn` on every
/// (iteration, fold) concurrently, and reduces in key order.
fn run_protocol<F>(fm: &FeatureMatrix, cfg: &CvConfig, mode: FusionMode, n_features: usize, fold_fn: F) -> Result<EvaluationReport>
where
    F: Fn(&[usize], &[usize], &mut ChaCha8Rng) -> Result<FoldOutput> + Sync,
{
    cfg.validate()?;
    let mut tasks = Vec::with_capacity(cfg.iterations * cfg.k);
    for it in 0..cfg.iterations {
        let mut rng = iteration_rng(cfg.seed, it as u64);
        let folds = stratified_group_kfold_with(&fm.subject_ids, &fm.labels, cfg.k, &mut rng)?;
        for f in 0..cfg.k {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..fm.n_rows()).partition(|&i| folds[i] == f);
            tasks.push((it, f, train, test));
        }
    }
    let models: Vec<ModelTrace> = tasks
        .par_iter()
        .map(|(it, f, train, test)| {
            let (n_tr, n_te) = check_disjoint(fm, train, test)?;
            let mut rng = fold_rng(cfg, *it, *f);
            let out = fold_fn(train, test, &mut rng)?;
            let truth: Vec<Label> = test.iter().map(|&r| fm.labels[r]).collect();
            let ids: Vec<String> = test.iter().map(|&r| fm.subject_ids[r].clone()).collect();
            let epoch = Metrics::from_predictions(&truth, &out.preds)?;
            let votes = vote_subjects(&ids, &truth, &out.preds, cfg.fit.strict)?;
            let subject = compute_metrics(&Confusion::from_pairs(votes.iter().map(|v| (&v.truth, &v.predicted))))?;
            Ok(ModelTrace {
                iteration: *it,
                fold: *f,
                n_train_subjects: n_tr,
                n_test_subjects: n_te,
                dim: out.dim,
                epoch,
                subject,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        mode,
        n_subjects: fm.subjects().len(),
        n_epochs: fm.n_rows(),
        n_features,
        epoch_metrics: MetricSummary::from_metrics(models.iter().map(|m| &m.epoch)),
        subject_metrics: MetricSummary::from_metrics(models.iter().map(|m| &m.subject)),
        fd_selected: median(models.iter().map(|m| m.dim).collect()),
        models,
    })
}

/// Repeated grouped cross-validation on one (possibly fused) feature matrix.
/// Ranking, dimension search, and training only ever see the training fold.
pub fn cross_validate(fm: &FeatureMatrix, cfg: &CvConfig) -> Result<EvaluationReport> {
    run_protocol(fm, cfg, FusionMode::FeatureLevel, fm.n_cols(), |train, test, rng| {
        let fitted = fit_pipeline(&fm.select_rows(train), &cfg.fit, rng)?;
        Ok(FoldOutput {
            preds: fitted.predict_rows(fm, test)?,
            dim: fitted.dim(),
        })
    })
}

fn check_aligned(channels: &[&FeatureMatrix]) -> Result<()> {
    let first = channels.first().ok_or(Error::Empty("channel matrices"))?;
    for c in &channels[1..] {
        if c.n_rows() != first.n_rows() {
            return Err(Error::RowMisalignment(c.n_rows().min(first.n_rows())));
        }
        if let Some(i) = (0..first.n_rows())
            .find(|&i| c.subject_ids[i] != first.subject_ids[i] || c.epoch_idx[i] != first.epoch_idx[i])
        {
            return Err(Error::RowMisalignment(i));
        }
    }
    Ok(())
}

/// Cross-validation with one model per channel; per-epoch probabilities are
/// averaged across channels and then voted per subject.
pub fn cross_validate_score_level(channels: &[&FeatureMatrix], cfg: &CvConfig) -> Result<EvaluationReport> {
    check_aligned(channels)?;
    let first = channels[0];
    let n_features = channels.iter().map(|c| c.n_cols()).sum();
    run_protocol(first, cfg, FusionMode::ScoreLevel, n_features, |train, test, rng| {
        let mut probs = vec![Vec::with_capacity(channels.len()); test.len()];
        let mut dim = 0;
        for ch in channels {
            let mut ch_rng = rng.clone();
            let fitted = fit_pipeline(&ch.select_rows(train), &cfg.fit, &mut ch_rng)?;
            dim += fitted.dim();
            for (p, q) in probs.iter_mut().zip(fitted.probability_rows(ch, test)?) {
                p.push(q);
            }
        }
        let preds = probs
            .iter()
            .map(|p| Ok(score_level_fuse(p)?.0))
            .collect::<Result<Vec<_>>>()?;
        Ok(FoldOutput { preds, dim })
    })
}

/// Evaluate a channel subset under the chosen fusion mode.
pub fn evaluate_channels(
    per_channel: &BTreeMap<usize, FeatureMatrix>,
    channels: &[usize],
    mode: FusionMode,
    cfg: &CvConfig,
) -> Result<EvaluationReport> {
    let parts = channels
        .iter()
        .map(|c| {
            per_channel
                .get(c)
                .ok_or_else(|| Error::InvalidParameter(format!("no features for channel {c}")))
        })
        .collect::<Result<Vec<_>>>()?;
    match mode {
        FusionMode::FeatureLevel => {
            if parts.len() == 1 {
                cross_validate(parts[0], cfg)
            } else {
                cross_validate(&FeatureMatrix::hconcat(&parts)?, cfg)
            }
        }
        FusionMode::ScoreLevel => cross_validate_score_level(&parts, cfg),
    }
}

/// All non-empty subsets of `channels`, by cardinality then lexicographically.
pub fn all_channel_subsets(channels: &[usize]) -> Vec<Vec<usize>> {
    let n = channels.len();
    let mut subsets: Vec<Vec<usize>> = (1u32..(1 << n))
        .map(|mask| (0..n).filter(|&i| mask & (1 << i) != 0).map(|i| channels[i]).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    subsets
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationRow {
    pub channels: Vec<usize>,
    pub n_features: usize,
    pub fd_selected: f64,
    pub epoch: MetricSummary,
    pub subject: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationTable {
    pub schema_version: u32,
    pub config: CvConfig,
    pub mode: FusionMode,
    pub rows: Vec<CombinationRow>,
    /// Best subset for each cardinality, by subject accuracy then F1.
    pub best_per_cardinality: Vec<CombinationRow>,
}

pub fn channel_combination_search(
    per_channel: &BTreeMap<usize, FeatureMatrix>,
    subsets: &[Vec<usize>],
    mode: FusionMode,
    cfg: &CvConfig,
) -> Result<CombinationTable> {
    let rows = subsets
        .par_iter()
        .map(|s| {
            let r = evaluate_channels(per_channel, s, mode, cfg)?;
            Ok(CombinationRow {
                channels: s.clone(),
                n_features: r.n_features,
                fd_selected: r.fd_selected,
                epoch: r.epoch_metrics,
                subject: r.subject_metrics,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: BTreeMap<usize, &CombinationRow> = BTreeMap::new();
    for r in &rows {
        let better = match best.get(&r.channels.len()) {
            None => true,
            Some(b) => r.subject.acc > b.subject.acc || (r.subject.acc == b.subject.acc && r.subject.f1 > b.subject.f1),
        };
        if better {
            best.insert(r.channels.len(), r);
        }
    }
    let best_per_cardinality = best.into_values().cloned().collect();
    Ok(CombinationTable {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        mode,
        rows,
        best_per_cardinality,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectPrediction {
    pub subject_id: String,
    pub predicted: Label,
    pub epochs: Vec<Label>,
    pub mean_probability: f64,
}

/// Train on every row of `train` and predict one voted label per held-out subject.
pub fn train_full_and_predict(train: &FeatureMatrix, heldout: &FeatureMatrix, cfg: &CvConfig) -> Result<Vec<SubjectPrediction>> {
    if heldout.columns != train.columns {
        return Err(Error::ConfigMismatch);
    }
    if heldout.n_rows() == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fitted = fit_pipeline(train, &cfg.fit, &mut rng)?;
    let rows: Vec<usize> = (0..heldout.n_rows()).collect();
    let preds = fitted.predict_rows(heldout, &rows)?;
    let probs = fitted.probability_rows(heldout, &rows)?;
    let votes = vote_subjects(&heldout.subject_ids, &heldout.labels, &preds, cfg.fit.strict)?;
    Ok(votes
        .into_iter()
        .map(|SubjectVote { subject_id, predicted, epochs, .. }| {
            let ps: Vec<f64> = (0..rows.len())
                .filter(|&r| heldout.subject_ids[r] == subject_id)
                .map(|r| probs[r])
                .collect();
            SubjectPrediction {
                mean_probability: ps.iter().sum::<f64>() / ps.len() as f64,
                subject_id,
                predicted,
                epochs,
            }
        })
        .collect())
}
