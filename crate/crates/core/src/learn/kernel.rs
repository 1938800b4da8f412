use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
    Linear,
    /// `(gamma <x, z> + coef0)^3`
    Poly3,
    /// `tanh(gamma <x, z> + coef0)`
    Sigmoid,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Rbf => "rbf",
            KernelKind::Linear => "linear",
            KernelKind::Poly3 => "poly3",
            KernelKind::Sigmoid => "sigmoid",
        })
    }
}

/// Kernel family plus the C-SVC box constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// `None` resolves to `1 / n_features` at training time.
    pub gamma: Option<f64>,
    pub coef0: f64,
    pub c: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::rbf(None, 1.0)
    }
}

impl KernelSpec {
    pub fn rbf(gamma: Option<f64>, c: f64) -> Self {
        KernelSpec {
            kind: KernelKind::Rbf,
            gamma,
            coef0: 0.0,
            c,
        }
    }

    pub fn linear(c: f64) -> Self {
        KernelSpec {
            kind: KernelKind::Linear,
            gamma: None,
            coef0: 0.0,
            c,
        }
    }

    pub fn poly3(gamma: Option<f64>, coef0: f64, c: f64) -> Self {
        KernelSpec {
            kind: KernelKind::Poly3,
            gamma,
            coef0,
            c,
        }
    }

    pub fn sigmoid(gamma: Option<f64>, coef0: f64, c: f64) -> Self {
        KernelSpec {
            kind: KernelKind::Sigmoid,
            gamma,
            coef0,
            c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidParameter(format!("C must be > 0, got {}", self.c)));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::InvalidParameter(format!("gamma must be > 0, got {g}")));
            }
        }
        if !self.coef0.is_finite() {
            return Err(Error::InvalidParameter("coef0 must be finite".into()));
        }
        Ok(())
    }

    pub fn resolved_gamma(&self, n_features: usize) -> f64 {
        self.gamma.unwrap_or(1.0 / n_features.max(1) as f64)
    }

    /// Kernel value from a precomputed dot product and squared distance.
    #[inline]
    pub fn from_parts(&self, gamma: f64, dot: f64, sqdist: f64) -> f64 {
        match self.kind {
            KernelKind::Rbf => (-gamma * sqdist).exp(),
            KernelKind::Linear => dot,
            KernelKind::Poly3 => (gamma * dot + self.coef0).powi(3),
            KernelKind::Sigmoid => (gamma * dot + self.coef0).tanh(),
        }
    }

    #[inline]
    pub fn eval(&self, gamma: f64, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Rbf => {
                let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d).exp()
            }
            _ => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                self.from_parts(gamma, dot, 0.0)
            }
        }
    }
}

/// Full symmetric kernel matrix, row-major.
pub fn kernel_matrix(spec: &KernelSpec, gamma: f64, x: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = spec.eval(gamma, &x[i], &x[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}
