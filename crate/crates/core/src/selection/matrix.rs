use serde::{Deserialize, Serialize};

use crate::dataio::Label;
use crate::error::{Error, Result};

/// Where a feature column came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnInfo {
    /// 1-based channel number.
    pub channel: usize,
    pub name: String,
}

/// Row-major epoch × feature matrix with labels and subject grouping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_cols: usize,
    data: Vec<f64>,
    pub labels: Vec<Label>,
    pub subject_ids: Vec<String>,
    pub epoch_idx: Vec<usize>,
    pub columns: Vec<ColumnInfo>,
}

impl FeatureMatrix {
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<Label>,
        subject_ids: Vec<String>,
        epoch_idx: Vec<usize>,
        columns: Vec<ColumnInfo>,
    ) -> Result<Self> {
        let n_cols = columns.len();
        let n_rows = rows.len();
        if labels.len() != n_rows || subject_ids.len() != n_rows || epoch_idx.len() != n_rows {
            return Err(Error::DimensionMismatch {
                expected: n_rows,
                got: labels.len().min(subject_ids.len()).min(epoch_idx.len()),
            });
        }
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    got: r.len(),
                });
            }
            data.extend(r);
        }
        let fm = FeatureMatrix {
            n_cols,
            data,
            labels,
            subject_ids,
            epoch_idx,
            columns,
        };
        fm.validate()?;
        Ok(fm)
    }

    /// Convenience constructor: unnamed columns on channel 0, one epoch per row.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<Label>, subject_ids: Vec<String>) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let epoch_idx = vec![0; rows.len()];
        let columns = (0..n_cols)
            .map(|j| ColumnInfo {
                channel: 0,
                name: format!("f{j}"),
            })
            .collect();
        Self::new(rows, labels, subject_ids, epoch_idx, columns)
    }

    fn validate(&self) -> Result<()> {
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut seen: std::collections::HashMap<&str, Label> = Default::default();
        for (s, &l) in self.subject_ids.iter().zip(&self.labels) {
            if *seen.entry(s.as_str()).or_insert(l) != l {
                return Err(Error::InconsistentLabels(s.clone()));
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.get(i, j)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_cols.max(1)).take(self.n_rows())
    }

    /// New matrix keeping `rows` in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            n_cols: self.n_cols,
            data,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            subject_ids: rows.iter().map(|&r| self.subject_ids[r].clone()).collect(),
            epoch_idx: rows.iter().map(|&r| self.epoch_idx[r]).collect(),
            columns: self.columns.clone(),
        }
    }

    /// New matrix keeping `cols` in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(self.n_rows() * cols.len());
        for i in 0..self.n_rows() {
            let row = self.row(i);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        FeatureMatrix {
            n_cols: cols.len(),
            data,
            labels: self.labels.clone(),
            subject_ids: self.subject_ids.clone(),
            epoch_idx: self.epoch_idx.clone(),
            columns: cols.iter().map(|&c| self.columns[c].clone()).collect(),
        }
    }

    /// Dense copy of the rows as owned vectors.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Same rows with every label flipped.
    pub fn with_flipped_labels(&self) -> FeatureMatrix {
        FeatureMatrix {
            labels: self.labels.iter().map(|l| l.flipped()).collect(),
            ..self.clone()
        }
    }

    /// Replace labels subject-wise (used for permutation nulls).
    pub fn with_labels(&self, labels: Vec<Label>) -> Result<FeatureMatrix> {
        if labels.len() != self.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows(),
                got: labels.len(),
            });
        }
        let fm = FeatureMatrix {
            labels,
            ..self.clone()
        };
        fm.validate()?;
        Ok(fm)
    }

    /// Column-wise concatenation. Rows must agree on subject, epoch, and label.
    pub fn hconcat(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix> {
        let first = parts.first().ok_or(Error::Empty("feature matrices"))?;
        for p in &parts[1..] {
            if p.n_rows() != first.n_rows() {
                return Err(Error::RowMisalignment(p.n_rows().min(first.n_rows())));
            }
            for i in 0..first.n_rows() {
                if p.subject_ids[i] != first.subject_ids[i]
                    || p.epoch_idx[i] != first.epoch_idx[i]
                    || p.labels[i] != first.labels[i]
                {
                    return Err(Error::RowMisalignment(i));
                }
            }
        }
        let n_cols: usize = parts.iter().map(|p| p.n_cols).sum();
        let mut data = Vec::with_capacity(first.n_rows() * n_cols);
        for i in 0..first.n_rows() {
            for p in parts {
                data.extend_from_slice(p.row(i));
            }
        }
        Ok(FeatureMatrix {
            n_cols,
            data,
            labels: first.labels.clone(),
            subject_ids: first.subject_ids.clone(),
            epoch_idx: first.epoch_idx.clone(),
            columns: parts.iter().flat_map(|p| p.columns.clone()).collect(),
        })
    }

    /// Distinct subjects in first-appearance order with their labels.
    pub fn subjects(&self) -> Vec<(String, Label)> {
        let mut seen = std::collections::HashSet::new();
        self.subject_ids
            .iter()
            .zip(&self.labels)
            .filter(|(s, _)| seen.insert(s.as_str()))
            .map(|(s, &l)| (s.clone(), l))
            .collect()
    }
}
