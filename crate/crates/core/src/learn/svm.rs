//! Two-class C-SVC trained by sequential minimal optimization.
//!
//! The solver follows the LIBSVM scheme: second-order working-set
//! selection, analytic two-variable updates with box clipping, and stopping
//! once the maximal KKT violation drops below `eps`. The kernel matrix is
//! precomputed, which suits the few-hundred-epoch training sets used here.

use serde::{Deserialize, Serialize};

use super::kernel::{kernel_matrix, KernelSpec};
use crate::dataio::Label;
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

/// Per-feature standardization learned on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: &[Vec<f64>]) -> Scaler {
        let d = x.first().map_or(0, Vec::len);
        let n = x.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = vec![0.0; d];
        for row in x {
            for j in 0..d {
                std[j] += (row[j] - mean[j]).powi(2);
            }
        }
        for s in std.iter_mut() {
            *s = (*s / n).sqrt();
            if !(*s > 0.0) {
                *s = 1.0;
            }
        }
        Scaler { mean, std }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoOptions {
    /// KKT violation tolerance.
    pub eps: f64,
    pub max_iter: usize,
    /// Once the KKT tolerance is met, keep tightening it until the duality
    /// gap falls below this value.
    pub gap_tol: f64,
    /// Record the dual objective after every iteration.
    pub record_objective: bool,
}

impl Default for SmoOptions {
    fn default() -> Self {
        SmoOptions {
            eps: 1e-3,
            max_iter: 10_000_000,
            gap_tol: 1e-3,
            record_objective: false,
        }
    }
}

/// Solution of the C-SVC dual.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Decision-function offset: `f(x) = sum alpha_i y_i K(x_i, x) + bias`.
    pub bias: f64,
    pub iterations: usize,
    /// Dual objective `1/2 a'Qa - e'a` (minimized).
    pub objective: f64,
    pub objective_trace: Vec<f64>,
    /// Primal minus dual objective at the returned point.
    pub duality_gap: f64,
}

/// Minimize `1/2 a'Qa - e'a` s.t. `0 <= a <= c`, `y'a = 0`, with
/// `Q_ij = y_i y_j K_ij`. `kernel` is the row-major `n x n` Gram matrix and
/// `y` holds +1/-1.
pub fn solve_smo(kernel: &[f64], y: &[f64], c: f64, opts: &SmoOptions) -> Result<DualSolution> {
    let n = y.len();
    if kernel.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: kernel.len(),
        });
    }
    if !y.iter().any(|&v| v > 0.0) || !y.iter().any(|&v| v < 0.0) {
        return Err(Error::SingleClass);
    }
    let k = |i: usize, j: usize| kernel[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut trace = Vec::new();
    let objective = |alpha: &[f64], grad: &[f64]| -> f64 {
        0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
    };
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let mut eps = opts.eps;
    while iterations < opts.max_iter {
        // i: maximal violating index in the "up" set
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        // j: second-order choice in the "low" set
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                if in_low(alpha[t], y[t]) {
                    let ygt = y[t] * grad[t];
                    gmax2 = gmax2.max(ygt);
                    let grad_diff = gmax + ygt;
                    if grad_diff > 0.0 {
                        let mut quad = k(i, i) + k(t, t) - 2.0 * k(i, t);
                        if quad <= 0.0 {
                            quad = TAU;
                        }
                        let obj = -grad_diff * grad_diff / quad;
                        if obj < best_obj {
                            best_obj = obj;
                            j_sel = Some(t);
                        }
                    }
                }
            }
        }
        let (i, j) = match (i_sel, j_sel) {
            (Some(i), Some(j)) if gmax + gmax2 >= eps => (i, j),
            (Some(i), Some(j)) if gmax + gmax2 > 1e-12 && offset_and_gap(&alpha, &grad, y, c).1 >= opts.gap_tol => {
                eps = (gmax + gmax2) / 10.0;
                (i, j)
            }
            _ => break,
        };
        iterations += 1;

        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let q_ij = y[i] * y[j] * k(i, j);
        if y[i] != y[j] {
            let mut quad = k(i, i) + k(j, j) + 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = k(i, i) + k(j, j) - 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (dai, daj) = (alpha[i] - old_ai, alpha[j] - old_aj);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k(i, t) * dai + y[j] * k(j, t) * daj);
        }
        if opts.record_objective {
            trace.push(objective(&alpha, &grad));
        }
    }

    let (bias, duality_gap) = offset_and_gap(&alpha, &grad, y, c);
    Ok(DualSolution {
        objective: objective(&alpha, &grad),
        alpha,
        bias,
        iterations,
        objective_trace: trace,
        duality_gap,
    })
}

/// Offset from free vectors (or the midpoint of the feasible interval) and
/// the primal-dual gap at the current point.
fn offset_and_gap(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> (f64, f64) {
    let n = y.len();
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    let bias = -rho;

    // (Qa)_i = g_i + 1, so y_i f(x_i) = g_i + 1 + y_i b
    let quad_form: f64 = alpha.iter().zip(grad).map(|(a, g)| a * (g + 1.0)).sum();
    let sum_alpha: f64 = alpha.iter().sum();
    let hinge: f64 = grad
        .iter()
        .zip(y)
        .map(|(g, yt)| (-(g + yt * bias)).max(0.0))
        .sum();
    let primal = 0.5 * quad_form + c * hinge;
    let dual = sum_alpha - 0.5 * quad_form;
    (bias, primal - dual)
}

/// Trained two-class kernel SVM. Support vectors are stored standardized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: KernelSpec,
    /// Gamma actually used (resolved from `kernel.gamma`).
    pub gamma: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub scaler: Scaler,
}

/// Training diagnostics kept alongside a model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Full dual vector over the training rows.
    pub alpha: Vec<f64>,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
    pub duality_gap: f64,
}

fn check_inputs(x: &[Vec<f64>], y: &[Label]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let d = x[0].len();
    for row in x {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
    }
    if !y.iter().any(|l| l.is_cad()) || y.iter().all(|l| l.is_cad()) {
        return Err(Error::SingleClass);
    }
    Ok(d)
}

pub fn svm_train(x: &[Vec<f64>], y: &[Label], kernel: &KernelSpec) -> Result<SvmModel> {
    Ok(svm_train_with(x, y, kernel, &SmoOptions::default())?.0)
}

pub fn svm_train_with(
    x: &[Vec<f64>],
    y: &[Label],
    kernel: &KernelSpec,
    opts: &SmoOptions,
) -> Result<(SvmModel, TrainReport)> {
    kernel.validate()?;
    let d = check_inputs(x, y)?;
    let scaler = Scaler::fit(x);
    let xs: Vec<Vec<f64>> = x.iter().map(|r| scaler.transform(r)).collect();
    let gamma = kernel.resolved_gamma(d);
    let gram = kernel_matrix(kernel, gamma, &xs);
    let ys: Vec<f64> = y.iter().map(|l| l.sign()).collect();
    let sol = solve_smo(&gram, &ys, kernel.c, opts)?;
    let model = model_from_solution(kernel, gamma, scaler, &xs, &ys, &sol);
    let report = TrainReport {
        alpha: sol.alpha,
        iterations: sol.iterations,
        objective_trace: sol.objective_trace,
        duality_gap: sol.duality_gap,
    };
    Ok((model, report))
}

/// Build a model from a dual solution over already-standardized rows.
pub fn model_from_solution(
    kernel: &KernelSpec,
    gamma: f64,
    scaler: Scaler,
    xs: &[Vec<f64>],
    ys: &[f64],
    sol: &DualSolution,
) -> SvmModel {
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for (t, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(xs[t].clone());
            dual_coefs.push(a * ys[t]);
        }
    }
    SvmModel {
        kernel: *kernel,
        gamma,
        support_vectors,
        dual_coefs,
        bias: sol.bias,
        scaler,
    }
}

impl SvmModel {
    pub fn n_features(&self) -> usize {
        self.scaler.mean.len()
    }

    /// Signed distance-like score: positive means CAD.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        let xs = self.scaler.transform(x);
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, c)| c * self.kernel.eval(self.gamma, sv, &xs))
            .sum::<f64>()
            + self.bias)
    }

    /// CAD iff the decision value is >= 0.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(label_from_decision(self.decision(x)?))
    }
}

/// Decision ties (exactly zero) go to CAD.
pub fn label_from_decision(d: f64) -> Label {
    if d >= 0.0 {
        Label::Cad
    } else {
        Label::Normal
    }
}

pub fn svm_decision(model: &SvmModel, x: &[f64]) -> Result<f64> {
    model.decision(x)
}
