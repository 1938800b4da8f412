//! Content-addressed stage caches.
//!
//! A cache file is named after the SHA-256 of everything that determines its
//! contents and stores that digest again inside, so a renamed or truncated
//! file is detected and rebuilt instead of being reused.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use pcgscreen::dataio::{load_annotations, load_manifest, Cohort};
use pcgscreen::pipeline::{extract_channels, preprocess_cohort, SubjectEpochs};
use pcgscreen::selection::FeatureMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheStatus {
    Hit,
    Miss,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EpochCache {
    pub key: String,
    pub train: Vec<SubjectEpochs>,
    pub heldout: Vec<SubjectEpochs>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FeatureCache {
    pub key: String,
    pub train: BTreeMap<usize, FeatureMatrix>,
    pub heldout: BTreeMap<usize, FeatureMatrix>,
}

struct Hasher(Sha256);

impl Hasher {
    fn new(stage: &str) -> Self {
        let mut h = Hasher(Sha256::new());
        h.field(b"pcgscreen");
        h.field(TOOL_VERSION.as_bytes());
        h.field(stage.as_bytes());
        h
    }

    /// Length-prefixed so adjacent fields cannot run together.
    fn field(&mut self, bytes: &[u8]) {
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(bytes);
    }

    fn json<T: Serialize>(&mut self, value: &T) {
        self.field(&serde_json::to_vec(value).expect("serializable"));
    }

    fn file(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
        self.field(&bytes);
        Ok(())
    }

    fn finish(self) -> String {
        format!("{:x}", self.0.finalize())
    }
}

fn cache_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.output_dir.join("cache")
}

fn read_cache<T: DeserializeOwned>(path: &Path) -> Option<T> {
    let bytes = fs::read(path).ok()?;
    bincode::deserialize(&bytes).ok()
}

fn write_cache<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    fs::create_dir_all(path.parent().expect("cache path has a parent"))?;
    let bytes = bincode::serialize(value).map_err(|e| CliError::data(format!("cache encoding failed: {e}")))?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)?;
    Ok(())
}

/// Digest of the manifest, annotations, every recording, and the
/// preprocessing settings.
pub fn epoch_key(cfg: &PipelineConfig) -> Result<String, CliError> {
    cfg.require_inputs()?;
    let manifest = load_manifest(&cfg.paths.manifest)?;
    let mut h = Hasher::new("epochs");
    h.json(&cfg.preprocess);
    h.json(&cfg.strict);
    h.file(&cfg.paths.manifest)?;
    h.file(&cfg.paths.annotations)?;
    for e in &manifest.entries {
        h.field(e.subject_id.as_bytes());
        h.file(&e.path)?;
    }
    Ok(h.finish())
}

pub fn epochs(cfg: &PipelineConfig) -> Result<(EpochCache, CacheStatus), CliError> {
    let key = epoch_key(cfg)?;
    let path = cache_dir(cfg).join(format!("epochs-{}.bin", &key[..16]));
    if let Some(c) = read_cache::<EpochCache>(&path) {
        if c.key == key {
            return Ok((c, CacheStatus::Hit));
        }
    }
    let manifest = load_manifest(&cfg.paths.manifest)?;
    let ann = load_annotations(&cfg.paths.annotations, cfg.strict)?;
    let cache = EpochCache {
        train: preprocess_cohort(&manifest, &ann, Cohort::Train, &cfg.preprocess)?,
        heldout: preprocess_cohort(&manifest, &ann, Cohort::Heldout, &cfg.preprocess)?,
        key,
    };
    if cache.train.is_empty() {
        return Err(CliError::data("manifest has no training subjects"));
    }
    write_cache(&path, &cache)?;
    Ok((cache, CacheStatus::Miss))
}

pub fn features(cfg: &PipelineConfig) -> Result<(FeatureCache, CacheStatus), CliError> {
    let (ep, _) = epochs(cfg)?;
    let specs = cfg.channel_specs()?;
    let mut h = Hasher::new("features");
    h.field(ep.key.as_bytes());
    h.json(&specs);
    let key = h.finish();
    let path = cache_dir(cfg).join(format!("features-{}.bin", &key[..16]));
    if let Some(c) = read_cache::<FeatureCache>(&path) {
        if c.key == key {
            return Ok((c, CacheStatus::Hit));
        }
    }
    let heldout = if ep.heldout.is_empty() {
        BTreeMap::new()
    } else {
        extract_channels(&ep.heldout, &specs)?
    };
    let cache = FeatureCache {
        train: extract_channels(&ep.train, &specs)?,
        heldout,
        key,
    };
    write_cache(&path, &cache)?;
    Ok((cache, CacheStatus::Miss))
}
