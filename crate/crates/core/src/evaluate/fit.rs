//! Ranking, dimension choice, optional grid search, and final training on one training set.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::folds::stratified_group_kfold_with;
use super::vote::vote_subjects;
use crate::dataio::Label;
use crate::error::{Error, Result};
use crate::learn::{compute_metrics, solve_smo, Classifier, Confusion, KernelSpec, Metrics, SmoOptions, TrainedModel};
use crate::selection::{incremental_dims, FeatureMatrix, RankedFeatureSet, RankingMethod, SearchResult};

/// How many ranked columns to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum DimSelection {
    All,
    Fixed { dim: usize },
    /// Search `step, 2*step, ..., D` on an inner validation split.
    Incremental { step: usize },
}

/// SVM grid: `C` values and gamma values expressed as multiples of `1 / n_features`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub c_values: Vec<f64>,
    pub gamma_scales: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            c_values: vec![0.1, 1.0, 10.0, 100.0],
            gamma_scales: vec![0.001, 0.01, 0.1, 1.0],
        }
    }
}

/// Everything needed to turn a training matrix into a predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub classifier: Classifier,
    pub ranking: RankingMethod,
    pub dims: DimSelection,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    /// Folds used to carve the inner validation split.
    pub inner_k: usize,
    pub strict: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            classifier: Classifier::default(),
            ranking: RankingMethod::RELIEFF_DEFAULT,
            dims: DimSelection::All,
            grid: None,
            inner_k: 5,
            strict: true,
        }
    }
}

/// A trained model plus the columns it reads.
#[derive(Debug, Clone)]
pub struct FittedPipeline {
    pub columns: Vec<usize>,
    pub classifier: Classifier,
    pub model: TrainedModel,
    pub search: Option<SearchResult>,
}

impl FittedPipeline {
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    fn project(&self, row: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|&c| row[c]).collect()
    }

    pub fn predict_rows(&self, fm: &FeatureMatrix, rows: &[usize]) -> Result<Vec<Label>> {
        rows.iter().map(|&r| self.model.predict(&self.project(fm.row(r)))).collect()
    }

    pub fn probability_rows(&self, fm: &FeatureMatrix, rows: &[usize]) -> Result<Vec<f64>> {
        rows.iter()
            .map(|&r| self.model.probability(&self.project(fm.row(r))))
            .collect()
    }
}

/// Split rows into (inner train, validation) by holding out one subject-grouped fold.
pub fn inner_split(fm: &FeatureMatrix, k: usize, rng: &mut ChaCha8Rng) -> Result<(Vec<usize>, Vec<usize>)> {
    let subjects = fm.subjects();
    let per_class = [Label::Cad, Label::Normal].map(|c| subjects.iter().filter(|(_, l)| *l == c).count());
    let k = k.min(per_class[0]).min(per_class[1]);
    if k < 2 {
        return Err(Error::TooFewSubjects {
            label: if per_class[0] < per_class[1] { Label::Cad } else { Label::Normal }.to_string(),
            found: per_class[0].min(per_class[1]),
            needed: 2,
        });
    }
    let folds = stratified_group_kfold_with(&fm.subject_ids, &fm.labels, k, rng)?;
    let (valid, train): (Vec<usize>, Vec<usize>) = (0..fm.n_rows()).partition(|&i| folds[i] == 0);
    Ok((train, valid))
}

fn subject_metrics(fm: &FeatureMatrix, rows: &[usize], preds: &[Label], strict: bool) -> Result<Metrics> {
    let ids: Vec<String> = rows.iter().map(|&r| fm.subject_ids[r].clone()).collect();
    let truth: Vec<Label> = rows.iter().map(|&r| fm.labels[r]).collect();
    let votes = vote_subjects(&ids, &truth, preds, strict)?;
    let mut c = Confusion::default();
    for v in &votes {
        c.add(v.truth, v.predicted);
    }
    compute_metrics(&c)
}

/// Subject-level validation metrics for a column subset and classifier.
pub fn evaluate_split(
    fm: &FeatureMatrix,
    train: &[usize],
    valid: &[usize],
    cols: &[usize],
    classifier: &Classifier,
    strict: bool,
) -> Result<Metrics> {
    let x: Vec<Vec<f64>> = train.iter().map(|&r| cols.iter().map(|&c| fm.get(r, c)).collect()).collect();
    let y: Vec<Label> = train.iter().map(|&r| fm.labels[r]).collect();
    let model = classifier.train(&x, &y)?;
    let preds = valid
        .iter()
        .map(|&r| model.predict(&cols.iter().map(|&c| fm.get(r, c)).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    subject_metrics(fm, valid, &preds, strict)
}

/// Incremental SVM search with kernels assembled from running per-pair sums,
/// so each added column costs one pass over the pairs instead of a full rebuild.
/// Produces the same models as training on each prefix from scratch.
pub fn fast_svm_curve(
    fm: &FeatureMatrix,
    train: &[usize],
    valid: &[usize],
    order: &[usize],
    dims: &[usize],
    kernel: &KernelSpec,
    strict: bool,
) -> Result<Vec<(usize, Metrics)>> {
    kernel.validate()?;
    let (ni, nv) = (train.len(), valid.len());
    let needs_dot = kernel.kind != crate::learn::KernelKind::Rbf;
    let mut tt = vec![0.0; ni * ni];
    let mut vt = vec![0.0; nv * ni];
    let ys: Vec<f64> = train.iter().map(|&r| fm.labels[r].sign()).collect();
    let mut zi = vec![0.0; ni];
    let mut zv = vec![0.0; nv];
    let mut added = 0;
    let mut out = Vec::with_capacity(dims.len());
    for &dim in dims {
        while added < dim {
            let c = order[added];
            let mean = train.iter().map(|&r| fm.get(r, c)).sum::<f64>() / ni as f64;
            let var = train.iter().map(|&r| (fm.get(r, c) - mean).powi(2)).sum::<f64>() / ni as f64;
            let sd = var.sqrt();
            let sd = if sd > 0.0 { sd } else { 1.0 };
            for (z, &r) in zi.iter_mut().zip(train) {
                *z = (fm.get(r, c) - mean) / sd;
            }
            for (z, &r) in zv.iter_mut().zip(valid) {
                *z = (fm.get(r, c) - mean) / sd;
            }
            for a in 0..ni {
                let row = &mut tt[a * ni..(a + 1) * ni];
                let za = zi[a];
                for b in a..ni {
                    row[b] += if needs_dot { za * zi[b] } else { (za - zi[b]) * (za - zi[b]) };
                }
            }
            for v in 0..nv {
                let row = &mut vt[v * ni..(v + 1) * ni];
                let zvv = zv[v];
                for b in 0..ni {
                    row[b] += if needs_dot { zvv * zi[b] } else { (zvv - zi[b]) * (zvv - zi[b]) };
                }
            }
            added += 1;
        }
        let gamma = kernel.resolved_gamma(dim);
        let part = |s: f64| if needs_dot { kernel.from_parts(gamma, s, 0.0) } else { kernel.from_parts(gamma, 0.0, s) };
        let mut gram = vec![0.0; ni * ni];
        for a in 0..ni {
            for b in a..ni {
                let k = part(tt[a * ni + b]);
                gram[a * ni + b] = k;
                gram[b * ni + a] = k;
            }
        }
        let sol = solve_smo(&gram, &ys, kernel.c, &SmoOptions::default())?;
        let preds: Vec<Label> = (0..nv)
            .map(|v| {
                let d: f64 = (0..ni)
                    .filter(|&b| sol.alpha[b] > 0.0)
                    .map(|b| sol.alpha[b] * ys[b] * part(vt[v * ni + b]))
                    .sum::<f64>()
                    + sol.bias;
                crate::learn::label_from_decision(d)
            })
            .collect();
        out.push((dim, subject_metrics(fm, valid, &preds, strict)?));
    }
    Ok(out)
}

fn best_of(curve: Vec<(usize, Metrics)>) -> Result<SearchResult> {
    let mut best: Option<(usize, Metrics)> = None;
    let points = curve.iter().map(|(d, m)| (*d, m.acc)).collect();
    for (dim, m) in curve {
        if best.as_ref().is_none_or(|(_, b)| m.acc > b.acc) {
            best = Some((dim, m));
        }
    }
    let (best_dim, best_metrics) = best.ok_or(Error::Empty("search dimensions"))?;
    Ok(SearchResult {
        best_dim,
        best_metrics,
        curve: points,
    })
}

/// Incremental search over the ranked columns on an inner split.
pub fn search_dimension(
    fm: &FeatureMatrix,
    ranking: &RankedFeatureSet,
    step: usize,
    classifier: &Classifier,
    inner_k: usize,
    strict: bool,
    rng: &mut ChaCha8Rng,
) -> Result<SearchResult> {
    let (train, valid) = inner_split(fm, inner_k, rng)?;
    let dims = incremental_dims(ranking.order.len(), step);
    let curve = match classifier {
        Classifier::Svm { kernel, .. } => fast_svm_curve(fm, &train, &valid, &ranking.order, &dims, kernel, strict)?,
        _ => dims
            .iter()
            .map(|&d| Ok((d, evaluate_split(fm, &train, &valid, ranking.top(d), classifier, strict)?)))
            .collect::<Result<Vec<_>>>()?,
    };
    best_of(curve)
}

fn grid_select(
    fm: &FeatureMatrix,
    cols: &[usize],
    base: &KernelSpec,
    grid: &GridSpec,
    inner_k: usize,
    strict: bool,
    rng: &mut ChaCha8Rng,
) -> Result<KernelSpec> {
    let (train, valid) = inner_split(fm, inner_k, rng)?;
    let n = cols.len().max(1) as f64;
    let mut best: Option<(f64, KernelSpec)> = None;
    for &c in &grid.c_values {
        for &g in &grid.gamma_scales {
            let spec = KernelSpec {
                c,
                gamma: Some(g / n),
                ..*base
            };
            let classifier = Classifier::svm(spec);
            let acc = evaluate_split(fm, &train, &valid, cols, &classifier, strict)?.acc;
            if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                best = Some((acc, spec));
            }
        }
    }
    Ok(best.map(|(_, s)| s).unwrap_or(*base))
}

/// Rank, choose the dimension, optionally grid-search, and train on all of `fm`.
pub fn fit_pipeline(fm: &FeatureMatrix, cfg: &FitConfig, rng: &mut ChaCha8Rng) -> Result<FittedPipeline> {
    if fm.n_cols() == 0 {
        return Err(Error::Empty("feature columns"));
    }
    let method = match cfg.dims {
        DimSelection::All => RankingMethod::None,
        _ => cfg.ranking,
    };
    let ranking = method.rank(fm)?;
    let (dim, search) = match cfg.dims {
        DimSelection::All => (fm.n_cols(), None),
        DimSelection::Fixed { dim } => {
            if dim == 0 {
                return Err(Error::InvalidParameter("fixed dimension must be positive".into()));
            }
            (dim.min(fm.n_cols()), None)
        }
        DimSelection::Incremental { step } => {
            let s = search_dimension(fm, &ranking, step, &cfg.classifier, cfg.inner_k, cfg.strict, rng)?;
            (s.best_dim, Some(s))
        }
    };
    let columns = ranking.top(dim).to_vec();
    let classifier = match (&cfg.grid, cfg.classifier) {
        (Some(grid), Classifier::Svm { kernel, platt }) => Classifier::Svm {
            kernel: grid_select(fm, &columns, &kernel, grid, cfg.inner_k, cfg.strict, rng)?,
            platt,
        },
        (_, c) => c,
    };
    let x: Vec<Vec<f64>> = fm.rows().map(|r| columns.iter().map(|&c| r[c]).collect()).collect();
    let model = classifier.train(&x, &fm.labels)?;
    Ok(FittedPipeline {
        columns,
        classifier,
        model,
        search,
    })
}
