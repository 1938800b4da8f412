//! Filtering, resampling, epoch segmentation, and z-normalization.
//!
//! The stages always run in the order filter → resample → segment →
//! z-normalize. [`preprocess_subject`] records each stage it runs in a
//! [`Stage`] trace so callers can check the ordering.

mod butterworth;
mod resample;

use serde::{Deserialize, Serialize};

use crate::dataio::{EpochAnnotations, Label, Recording};
use crate::error::{Error, Result};

pub use butterworth::{lowpass_filter, Biquad, FilterSpec, SosFilter};
pub use resample::{rational_ratio, resample, Resampler};

/// Rate the epochs are analysed at.
pub const TARGET_FS_HZ: f64 = 2000.0;
/// Shortest two-cycle epoch accepted in strict mode (1.05 s at 2 kHz).
pub const MIN_EPOCH_SAMPLES: usize = 2111;
/// Longest two-cycle epoch accepted in strict mode (2.65 s at 2 kHz).
pub const MAX_EPOCH_SAMPLES: usize = 5299;

/// A single-channel segment of two heart cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    pub subject_id: String,
    /// 1-based channel number.
    pub channel_id: usize,
    pub epoch_idx: usize,
    pub samples: Vec<f64>,
    pub label: Label,
}

impl Epoch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Cut every channel of a 2 kHz recording with the subject's shared spans.
///
/// Output order is span-major, then channel.
pub fn segment_epochs(
    recording: &Recording,
    ann: &EpochAnnotations,
    label: Label,
) -> Result<Vec<Epoch>> {
    let len = recording.n_samples();
    let spans = ann.for_subject(&recording.subject_id);
    let mut out = Vec::with_capacity(spans.len() * recording.n_channels());
    for span in spans {
        if span.end_sample > len || span.start_sample >= span.end_sample {
            return Err(Error::SpanOutOfRange {
                start: span.start_sample,
                end: span.end_sample,
                len,
            });
        }
        for (c, channel) in recording.channels.iter().enumerate() {
            out.push(Epoch {
                subject_id: recording.subject_id.clone(),
                channel_id: c + 1,
                epoch_idx: span.epoch_idx,
                samples: channel[span.start_sample..span.end_sample].to_vec(),
                label,
            });
        }
    }
    Ok(out)
}

/// `(x - mean) / std` with the population standard deviation.
pub fn z_normalize_samples(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Empty("epoch"));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if x.iter().all(|&v| v == x[0]) || !(std > 1e-12 * mean.abs()) {
        return Err(Error::ZeroVariance);
    }
    let mut z: Vec<f64> = x.iter().map(|v| (v - mean) / std).collect();
    // one refinement pass removes the residual rounding in mean and scale
    let m2 = z.iter().sum::<f64>() / n;
    let s2 = (z.iter().map(|v| (v - m2) * (v - m2)).sum::<f64>() / n).sqrt();
    z.iter_mut().for_each(|v| *v = (*v - m2) / s2);
    Ok(z)
}

pub fn z_normalize(epoch: &Epoch) -> Result<Epoch> {
    Ok(Epoch {
        samples: z_normalize_samples(&epoch.samples)?,
        ..epoch.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Filter,
    Resample,
    Segment,
    ZNormalize,
}

/// Settings shared by every subject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub filter: FilterSpec,
    pub target_fs_hz: f64,
    /// Reject epochs outside the observed 2111..=5299 sample range.
    pub strict: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            filter: FilterSpec::default(),
            target_fs_hz: TARGET_FS_HZ,
            strict: true,
        }
    }
}

/// Epochs of one subject plus the stage trace.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub epochs: Vec<Epoch>,
    pub trace: Vec<Stage>,
}

/// Run the full chain on one raw recording.
pub fn preprocess_subject(
    recording: &Recording,
    ann: &EpochAnnotations,
    label: Label,
    cfg: &PreprocessConfig,
) -> Result<Preprocessed> {
    let mut trace = Vec::with_capacity(4);
    let sos = SosFilter::butterworth_lowpass(cfg.filter, recording.fs_hz)?;
    let filtered: Vec<Vec<f64>> = recording.channels.iter().map(|c| sos.apply(c)).collect();
    trace.push(Stage::Filter);

    let resampler = Resampler::new(recording.fs_hz, cfg.target_fs_hz)?;
    let resampled: Vec<Vec<f64>> = filtered.iter().map(|c| resampler.process(c)).collect();
    trace.push(Stage::Resample);

    let at_target = Recording {
        channels: resampled,
        fs_hz: cfg.target_fs_hz,
        ..recording.clone()
    };
    let raw_epochs = segment_epochs(&at_target, ann, label)?;
    trace.push(Stage::Segment);
    if cfg.strict {
        if let Some(e) = raw_epochs
            .iter()
            .find(|e| !(MIN_EPOCH_SAMPLES..=MAX_EPOCH_SAMPLES).contains(&e.len()))
        {
            return Err(Error::InvalidSpan {
                subject: e.subject_id.clone(),
                reason: format!(
                    "epoch length {} outside {MIN_EPOCH_SAMPLES}..={MAX_EPOCH_SAMPLES}",
                    e.len()
                ),
            });
        }
    }

    let epochs = raw_epochs
        .iter()
        .map(z_normalize)
        .collect::<Result<Vec<_>>>()?;
    trace.push(Stage::ZNormalize);
    Ok(Preprocessed { epochs, trace })
}
