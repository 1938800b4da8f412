//! Dataset-level preprocessing and per-channel feature extraction.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cepstral::{epoch_feature_vector, CepstralConfig, FilterScale};
use crate::dataio::{load_recording, Cohort, DatasetManifest, EpochAnnotations, Label, Recording};
use crate::error::{Error, Result};
use crate::preprocess::{preprocess_subject, Epoch, PreprocessConfig, TARGET_FS_HZ};
use crate::selection::{ColumnInfo, FeatureMatrix};
use crate::spectral::{subband_powers, welch_psd, SubbandConfig, WELCH_WINDOW};

/// Feature family and its configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FeatureSpec {
    Psd(SubbandConfig),
    Cepstral(CepstralConfig),
}

impl FeatureSpec {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureSpec::Psd(_) => "psd",
            FeatureSpec::Cepstral(c) => match c.scale {
                FilterScale::Linear => "lfcc",
                FilterScale::Mel => "mfcc",
                FilterScale::Gammatone => "gfcc",
            },
        }
    }

    /// Column names for one channel.
    pub fn column_names(&self, n_features: usize) -> Vec<String> {
        match self {
            FeatureSpec::Psd(_) => (0..n_features).map(|b| format!("psd_b{b:03}")).collect(),
            FeatureSpec::Cepstral(c) => {
                let per = c.coeffs_per_frame();
                (0..n_features)
                    .map(|j| format!("{}_f{:03}_c{:02}", self.name(), j / per, c.coeff_lo + j % per))
                    .collect()
            }
        }
    }
}

/// Features of one z-normalized epoch.
pub fn epoch_features(samples: &[f64], spec: &FeatureSpec, fs_hz: f64) -> Result<Vec<f64>> {
    match spec {
        FeatureSpec::Psd(cfg) => subband_powers(&welch_psd(samples, fs_hz, WELCH_WINDOW, 0.5)?, cfg),
        FeatureSpec::Cepstral(cfg) => epoch_feature_vector(samples, cfg, fs_hz),
    }
}

/// One subject's preprocessed epochs, every channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEpochs {
    pub subject_id: String,
    pub label: Label,
    pub epochs: Vec<Epoch>,
}

impl SubjectEpochs {
    pub fn channel(&self, channel: usize) -> impl Iterator<Item = &Epoch> {
        self.epochs.iter().filter(move |e| e.channel_id == channel)
    }

    pub fn n_channels(&self) -> usize {
        self.epochs.iter().map(|e| e.channel_id).max().unwrap_or(0)
    }
}

pub fn preprocess_recording(
    rec: &Recording,
    ann: &EpochAnnotations,
    label: Label,
    cfg: &PreprocessConfig,
) -> Result<SubjectEpochs> {
    Ok(SubjectEpochs {
        subject_id: rec.subject_id.clone(),
        label,
        epochs: preprocess_subject(rec, ann, label, cfg)?.epochs,
    })
}

/// Load and preprocess every subject of a cohort, in manifest order.
pub fn preprocess_cohort(
    manifest: &DatasetManifest,
    ann: &EpochAnnotations,
    cohort: Cohort,
    cfg: &PreprocessConfig,
) -> Result<Vec<SubjectEpochs>> {
    let entries: Vec<_> = manifest.cohort(cohort).collect();
    entries
        .par_iter()
        .map(|e| {
            let mut rec = load_recording(&e.path)?;
            rec.subject_id = e.subject_id.clone();
            preprocess_recording(&rec, ann, e.label, cfg)
        })
        .collect()
}

/// Epoch x feature matrix for one channel; rows ordered by subject, then epoch.
pub fn extract_channel(subjects: &[SubjectEpochs], channel: usize, spec: &FeatureSpec) -> Result<FeatureMatrix> {
    let jobs: Vec<&Epoch> = subjects
        .iter()
        .flat_map(|s| {
            let mut eps: Vec<&Epoch> = s.channel(channel).collect();
            eps.sort_by_key(|e| e.epoch_idx);
            eps
        })
        .collect();
    if jobs.is_empty() {
        return Err(Error::InvalidParameter(format!("no epochs for channel {channel}")));
    }
    let rows = jobs
        .par_iter()
        .map(|e| epoch_features(&e.samples, spec, TARGET_FS_HZ))
        .collect::<Result<Vec<_>>>()?;
    let n = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: r.len(),
        });
    }
    let columns = spec
        .column_names(n)
        .into_iter()
        .map(|name| ColumnInfo { channel, name })
        .collect();
    FeatureMatrix::new(
        rows,
        jobs.iter().map(|e| e.label).collect(),
        jobs.iter().map(|e| e.subject_id.clone()).collect(),
        jobs.iter().map(|e| e.epoch_idx).collect(),
        columns,
    )
}

/// Per-channel matrices for the requested channels.
pub fn extract_channels(
    subjects: &[SubjectEpochs],
    specs: &BTreeMap<usize, FeatureSpec>,
) -> Result<BTreeMap<usize, FeatureMatrix>> {
    specs
        .iter()
        .map(|(&ch, spec)| Ok((ch, extract_channel(subjects, ch, spec)?)))
        .collect()
}
