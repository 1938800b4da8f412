//! Classifiers, probability mapping, rank-sum test, and metrics.

mod kernel;
mod knn;
mod metrics;
mod model_io;
mod prob;
mod stats;
mod svm;

use serde::{Deserialize, Serialize};

use crate::dataio::Label;
use crate::error::Result;

pub use kernel::{kernel_matrix, KernelKind, KernelSpec};
pub use knn::{knn_predict, knn_predict_with_score, knn_vote_from_distances, DistanceMetric};
pub use metrics::{compute_metrics, Confusion, Metrics};
pub use model_io::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use prob::{decision_to_probability, fit_platt, ProbabilityMap};
pub use stats::{midranks, rank_sum_test, wilcoxon_rank_sum, RankSumMethod, RankSumTest, EXACT_MAX_TOTAL};
pub use svm::{
    label_from_decision, model_from_solution, solve_smo, svm_decision, svm_train, svm_train_with, DualSolution,
    Scaler, SmoOptions, SvmModel, TrainReport,
};

pub const KNN_DEFAULT_K: usize = 11;

/// Classifier family and hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Classifier {
    Svm {
        kernel: KernelSpec,
        /// Fit Platt scaling on the training decisions instead of the plain logistic link.
        #[serde(default)]
        platt: bool,
    },
    Knn { k: usize, metric: DistanceMetric },
}

impl Default for Classifier {
    fn default() -> Self {
        Classifier::Svm {
            kernel: KernelSpec::default(),
            platt: false,
        }
    }
}

impl Classifier {
    pub fn svm(kernel: KernelSpec) -> Self {
        Classifier::Svm { kernel, platt: false }
    }

    pub fn knn(metric: DistanceMetric) -> Self {
        Classifier::Knn {
            k: KNN_DEFAULT_K,
            metric,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Classifier::Svm { kernel, .. } => format!("svm-{}", kernel.kind),
            Classifier::Knn { k, metric } => format!("knn{k}-{metric}"),
        }
    }

    pub fn train(&self, x: &[Vec<f64>], y: &[Label]) -> Result<TrainedModel> {
        match *self {
            Classifier::Svm { kernel, platt } => {
                let model = svm_train(x, y, &kernel)?;
                let prob = if platt {
                    let d = x.iter().map(|r| model.decision(r)).collect::<Result<Vec<_>>>()?;
                    fit_platt(&d, y)?
                } else {
                    ProbabilityMap::Logistic
                };
                Ok(TrainedModel::Svm { model, prob })
            }
            Classifier::Knn { k, metric } => {
                if k == 0 || k > x.len() {
                    return Err(crate::error::Error::InvalidParameter(format!(
                        "k = {k} must be in 1..={}",
                        x.len()
                    )));
                }
                let scaler = Scaler::fit(x);
                Ok(TrainedModel::Knn {
                    train_x: x.iter().map(|r| scaler.transform(r)).collect(),
                    train_y: y.to_vec(),
                    scaler,
                    k,
                    metric,
                })
            }
        }
    }
}

/// A fitted classifier; immutable after training.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Svm {
        model: SvmModel,
        prob: ProbabilityMap,
    },
    Knn {
        scaler: Scaler,
        train_x: Vec<Vec<f64>>,
        train_y: Vec<Label>,
        k: usize,
        metric: DistanceMetric,
    },
}

impl TrainedModel {
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        match self {
            TrainedModel::Svm { model, .. } => model.predict(x),
            TrainedModel::Knn {
                scaler,
                train_x,
                train_y,
                k,
                metric,
            } => knn_predict(train_x, train_y, &scaler.transform(x), *k, *metric),
        }
    }

    /// P(CAD): the mapped SVM decision, or the CAD vote fraction for k-NN.
    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        match self {
            TrainedModel::Svm { model, prob } => Ok(prob.apply(model.decision(x)?)),
            TrainedModel::Knn {
                scaler,
                train_x,
                train_y,
                k,
                metric,
            } => Ok(knn_predict_with_score(train_x, train_y, &scaler.transform(x), *k, *metric)?.1),
        }
    }
}
