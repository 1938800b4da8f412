use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the screening pipeline.
///
/// Variants are grouped by the stage that raises them so callers (the CLI in
/// particular) can map them onto configuration, data, or numeric failures.
#[derive(Debug, Error)]
pub enum Error {
    // ---- input / data errors ----
    #[error("unreadable file {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("zero channels in {0}")]
    ZeroChannels(PathBuf),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("duplicate subject_id `{0}`")]
    DuplicateSubject(String),
    #[error("unknown label token `{0}`")]
    UnknownLabel(String),
    #[error("unknown cohort token `{0}`")]
    UnknownCohort(String),
    #[error("path does not exist: {0}")]
    MissingPath(PathBuf),
    #[error("overlapping spans for subject `{0}`")]
    OverlappingSpans(String),
    #[error("invalid span for subject `{subject}`: {reason}")]
    InvalidSpan { subject: String, reason: String },
    #[error("expected 3 epochs for subject `{subject}`, found {found}")]
    ExpectedThreeEpochs { subject: String, found: usize },
    #[error("span out of range: [{start}, {end}) exceeds {len} samples")]
    SpanOutOfRange { start: usize, end: usize, len: usize },
    #[error("malformed record: {0}")]
    Malformed(String),

    // ---- parameter errors ----
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cutoff {cutoff_hz} Hz is not below Nyquist ({nyquist_hz} Hz)")]
    CutoffAboveNyquist { cutoff_hz: f64, nyquist_hz: f64 },
    #[error("rate pair {fs_in}/{fs_out} is not a rational ratio of positive rates")]
    IrrationalRate { fs_in: f64, fs_out: f64 },
    #[error("sub-band width {0} Hz is not on the supported grid")]
    UnsupportedSubband(f64),

    // ---- numeric / shape errors ----
    #[error("zero variance")]
    ZeroVariance,
    #[error("signal too short: need {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in features")]
    NonFinite,
    #[error("single-class input")]
    SingleClass,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("class `{label}` has {found} subjects, need at least {needed}")]
    TooFewSubjects {
        label: String,
        found: usize,
        needed: usize,
    },
    #[error("row misalignment between fused matrices at row {0}")]
    RowMisalignment(usize),
    #[error("inconsistent labels for subject `{0}`")]
    InconsistentLabels(String),
    #[error("subject leakage: `{0}` appears in both train and test")]
    Leakage(String),
    #[error("feature configuration mismatch between training and held-out data")]
    ConfigMismatch,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidParameter(_)
            | CutoffAboveNyquist { .. }
            | IrrationalRate { .. }
            | UnsupportedSubband(_)
            | ConfigMismatch => ErrorClass::Config,
            ZeroVariance | NonFinite | SingleClass | DimensionMismatch { .. } => {
                ErrorClass::Numeric
            }
            _ => ErrorClass::Data,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Malformed(e.to_string())
    }
}
