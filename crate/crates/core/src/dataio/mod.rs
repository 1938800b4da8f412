//! Recordings, dataset manifests, and epoch annotations.
//!
//! Manifests and annotations are comma-separated UTF-8 with a header row.
//! Annotation sample indices refer to the 2 kHz post-resample timeline.

mod wav;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use wav::{decode_wav, encode_wav, SampleEncoding};

/// Maximum number of channels a vest recording carries.
pub const MAX_CHANNELS: usize = 7;
/// Number of epochs kept per subject.
pub const EPOCHS_PER_SUBJECT: usize = 3;

/// Diagnostic class of a subject. CAD is the positive class throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "CAD")]
    Cad,
    Normal,
}

impl Label {
    pub fn is_cad(self) -> bool {
        self == Label::Cad
    }

    /// +1 for CAD, -1 for Normal.
    pub fn sign(self) -> f64 {
        if self.is_cad() {
            1.0
        } else {
            -1.0
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Cad => Label::Normal,
            Label::Normal => Label::Cad,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Cad => "CAD",
            Label::Normal => "Normal",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cad" => Ok(Label::Cad),
            "normal" => Ok(Label::Normal),
            _ => Err(Error::UnknownLabel(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cohort {
    Train,
    Heldout,
}

impl fmt::Display for Cohort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cohort::Train => "train",
            Cohort::Heldout => "heldout",
        })
    }
}

impl FromStr for Cohort {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Cohort::Train),
            "heldout" => Ok(Cohort::Heldout),
            _ => Err(Error::UnknownCohort(s.to_string())),
        }
    }
}

/// One subject's synchronous multi-channel recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    /// `channels[c][n]`, amplitude in normalized full-scale units.
    pub channels: Vec<Vec<f64>>,
    pub fs_hz: f64,
    pub bit_depth: u16,
    pub encoding: SampleEncoding,
}

impl Recording {
    pub fn new(
        subject_id: impl Into<String>,
        channels: Vec<Vec<f64>>,
        fs_hz: f64,
        encoding: SampleEncoding,
    ) -> Result<Self> {
        let rec = Recording {
            subject_id: subject_id.into(),
            channels,
            fs_hz,
            bit_depth: encoding.bit_depth(),
            encoding,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(Error::ZeroChannels(PathBuf::from(&self.subject_id)));
        }
        if self.channels.len() > MAX_CHANNELS {
            return Err(Error::Malformed(format!(
                "{} channels, at most {MAX_CHANNELS} supported",
                self.channels.len()
            )));
        }
        let n = self.channels[0].len();
        if self.channels.iter().any(|c| c.len() != n) {
            return Err(Error::Malformed("channels differ in length".into()));
        }
        if !(self.fs_hz > 0.0) {
            return Err(Error::InvalidParameter("fs_hz must be positive".into()));
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }
}

/// Load a multitrack waveform file. The subject id is taken from the file stem.
pub fn load_recording(path: impl AsRef<Path>) -> Result<Recording> {
    let path = path.as_ref();
    let wav = wav::read_wav(path)?;
    let subject_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let rec = Recording {
        subject_id,
        channels: wav.channels,
        fs_hz: wav.fs_hz,
        bit_depth: wav.encoding.bit_depth(),
        encoding: wav.encoding,
    };
    rec.validate().map_err(|e| match e {
        Error::ZeroChannels(_) => Error::ZeroChannels(path.to_path_buf()),
        other => other,
    })?;
    Ok(rec)
}

pub fn write_recording(path: impl AsRef<Path>, rec: &Recording) -> Result<()> {
    rec.validate()?;
    let bytes = encode_wav(&rec.channels, rec.fs_hz, rec.encoding)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub path: PathBuf,
    pub label: Label,
    pub cohort: Cohort,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn cohort(&self, cohort: Cohort) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.cohort == cohort)
    }

    pub fn count(&self, label: Label) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn field<'a>(rec: &'a csv::StringRecord, idx: usize, name: &str) -> Result<&'a str> {
    rec.get(idx)
        .map(str::trim)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::UnreadableFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
}

/// Load a manifest. Relative paths resolve against the manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv_reader(path)?;
    let headers = reader.headers()?.clone();
    let i_subject = header_index(&headers, "subject_id")?;
    let i_path = header_index(&headers, "path")?;
    let i_label = header_index(&headers, "label")?;
    let i_cohort = header_index(&headers, "cohort")?;

    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let subject_id = field(&rec, i_subject, "subject_id")?.to_string();
        if !seen.insert(subject_id.clone()) {
            return Err(Error::DuplicateSubject(subject_id));
        }
        let raw_path = PathBuf::from(field(&rec, i_path, "path")?);
        let resolved = if raw_path.is_absolute() {
            raw_path
        } else {
            base.join(raw_path)
        };
        if !resolved.exists() {
            return Err(Error::MissingPath(resolved));
        }
        entries.push(ManifestEntry {
            subject_id,
            path: resolved,
            label: field(&rec, i_label, "label")?.parse()?,
            cohort: field(&rec, i_cohort, "cohort")?.parse()?,
        });
    }
    Ok(DatasetManifest { entries })
}

/// Write a manifest with paths relative to `dir` where possible.
pub fn write_manifest(path: impl AsRef<Path>, manifest: &DatasetManifest) -> Result<()> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["subject_id", "path", "label", "cohort"])?;
    for e in &manifest.entries {
        let rel = e.path.strip_prefix(base).unwrap_or(&e.path);
        w.write_record([
            e.subject_id.as_str(),
            &rel.to_string_lossy(),
            &e.label.to_string(),
            &e.cohort.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Half-open `[start_sample, end_sample)` span on the 2 kHz timeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochSpan {
    pub subject_id: String,
    pub epoch_idx: usize,
    pub start_sample: usize,
    pub end_sample: usize,
}

impl EpochSpan {
    pub fn len(&self) -> usize {
        self.end_sample - self.start_sample
    }

    pub fn is_empty(&self) -> bool {
        self.end_sample <= self.start_sample
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochAnnotations {
    pub spans: Vec<EpochSpan>,
}

impl EpochAnnotations {
    /// Validate and wrap a span list. `strict` requires exactly three spans per subject.
    pub fn new(spans: Vec<EpochSpan>, strict: bool) -> Result<Self> {
        let ann = EpochAnnotations { spans };
        ann.validate(strict)?;
        Ok(ann)
    }

    /// Spans of one subject ordered by epoch index.
    pub fn for_subject(&self, subject_id: &str) -> Vec<&EpochSpan> {
        let mut v: Vec<_> = self
            .spans
            .iter()
            .filter(|s| s.subject_id == subject_id)
            .collect();
        v.sort_by_key(|s| s.epoch_idx);
        v
    }

    fn by_subject(&self) -> BTreeMap<&str, Vec<&EpochSpan>> {
        let mut map: BTreeMap<&str, Vec<&EpochSpan>> = BTreeMap::new();
        for s in &self.spans {
            map.entry(s.subject_id.as_str()).or_default().push(s);
        }
        map
    }

    pub fn validate(&self, strict: bool) -> Result<()> {
        for s in &self.spans {
            if s.end_sample <= s.start_sample {
                return Err(Error::InvalidSpan {
                    subject: s.subject_id.clone(),
                    reason: format!("end {} <= start {}", s.end_sample, s.start_sample),
                });
            }
            if s.epoch_idx >= EPOCHS_PER_SUBJECT {
                return Err(Error::InvalidSpan {
                    subject: s.subject_id.clone(),
                    reason: format!("epoch_idx {} outside 0..2", s.epoch_idx),
                });
            }
        }
        for (subject, mut spans) in self.by_subject() {
            spans.sort_by_key(|s| (s.start_sample, s.end_sample));
            for pair in spans.windows(2) {
                if pair[1].start_sample < pair[0].end_sample {
                    return Err(Error::OverlappingSpans(subject.to_string()));
                }
                if pair[1].epoch_idx <= pair[0].epoch_idx {
                    return Err(Error::InvalidSpan {
                        subject: subject.to_string(),
                        reason: "epoch indices not time-ordered or duplicated".into(),
                    });
                }
            }
            if strict && spans.len() != EPOCHS_PER_SUBJECT {
                return Err(Error::ExpectedThreeEpochs {
                    subject: subject.to_string(),
                    found: spans.len(),
                });
            }
        }
        Ok(())
    }
}

pub fn load_annotations(path: impl AsRef<Path>, strict: bool) -> Result<EpochAnnotations> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    let headers = reader.headers()?.clone();
    let i_subject = header_index(&headers, "subject_id")?;
    let i_epoch = header_index(&headers, "epoch_idx")?;
    let i_start = header_index(&headers, "start_sample")?;
    let i_end = header_index(&headers, "end_sample")?;

    let parse = |rec: &csv::StringRecord, idx: usize, name: &str| -> Result<usize> {
        let raw = field(rec, idx, name)?;
        raw.parse::<usize>()
            .map_err(|_| Error::Malformed(format!("{name} `{raw}` is not a non-negative integer")))
    };

    let mut spans = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        spans.push(EpochSpan {
            subject_id: field(&rec, i_subject, "subject_id")?.to_string(),
            epoch_idx: parse(&rec, i_epoch, "epoch_idx")?,
            start_sample: parse(&rec, i_start, "start_sample")?,
            end_sample: parse(&rec, i_end, "end_sample")?,
        });
    }
    EpochAnnotations::new(spans, strict)
}

pub fn write_annotations(path: impl AsRef<Path>, ann: &EpochAnnotations) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["subject_id", "epoch_idx", "start_sample", "end_sample"])?;
    for s in &ann.spans {
        w.write_record([
            s.subject_id.clone(),
            s.epoch_idx.to_string(),
            s.start_sample.to_string(),
            s.end_sample.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
