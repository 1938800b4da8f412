use serde::{Deserialize, Serialize};

use crate::dataio::Label;
use crate::error::{Error, Result};

/// Two-class confusion counts with CAD as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a Label, &'a Label)>) -> Confusion {
        let mut c = Confusion::default();
        for (truth, pred) in pairs {
            c.add(*truth, *pred);
        }
        c
    }

    pub fn add(&mut self, truth: Label, pred: Label) {
        match (truth.is_cad(), pred.is_cad()) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Sensitivity, specificity, accuracy, and F1.
///
/// Ratios with a zero denominator are reported as 0 and flagged in `undefined`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sens: f64,
    pub spec: f64,
    pub acc: f64,
    pub f1: f64,
    pub precision: f64,
    pub confusion: Confusion,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

fn ratio(num: usize, den: usize, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_metrics(c: &Confusion) -> Result<Metrics> {
    if c.total() == 0 {
        return Err(Error::Empty("confusion matrix"));
    }
    let mut undefined = Vec::new();
    let sens = ratio(c.tp, c.tp + c.fn_, "sens", &mut undefined);
    let spec = ratio(c.tn, c.tn + c.fp, "spec", &mut undefined);
    let precision = ratio(c.tp, c.tp + c.fp, "precision", &mut undefined);
    let acc = (c.tp + c.tn) as f64 / c.total() as f64;
    let f1 = if precision + sens > 0.0 {
        2.0 * precision * sens / (precision + sens)
    } else {
        undefined.push("f1".into());
        0.0
    };
    Ok(Metrics {
        sens,
        spec,
        acc,
        f1,
        precision,
        confusion: *c,
        undefined,
    })
}

impl Metrics {
    pub fn from_predictions(truth: &[Label], pred: &[Label]) -> Result<Metrics> {
        compute_metrics(&Confusion::from_pairs(truth.iter().zip(pred)))
    }

    /// Mean of sensitivity and specificity.
    pub fn sens_spec(&self) -> f64 {
        0.5 * (self.sens + self.spec)
    }
}
