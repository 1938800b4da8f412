//! Pipeline configuration file (TOML). See `docs/config.md` for the schema.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pcgscreen::cepstral::CepstralConfig;
use pcgscreen::dataio::MAX_CHANNELS;
use pcgscreen::evaluate::{CvConfig, DimSelection, FitConfig, FusionMode, GridSpec};
use pcgscreen::learn::Classifier;
use pcgscreen::pipeline::FeatureSpec;
use pcgscreen::preprocess::PreprocessConfig;
use pcgscreen::selection::RankingMethod;
use pcgscreen::spectral::SubbandConfig;
use pcgscreen::synth::SynthParams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Psd,
    Lfcc,
    Mfcc,
    Gfcc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub manifest: PathBuf,
    pub annotations: PathBuf,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_per_class: usize,
    pub n_heldout_per_class: usize,
    pub params: SynthParams,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            n_per_class: 40,
            n_heldout_per_class: 0,
            params: SynthParams::default(),
        }
    }
}

/// Per-channel feature settings; unset fields fall back to the section defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFeatures {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frames: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coeff_lo: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coeff_hi: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sbw_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tbw_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub family: Family,
    pub channels: Vec<usize>,
    pub frames: usize,
    pub coeff_lo: usize,
    pub coeff_hi: usize,
    pub sbw_hz: f64,
    pub tbw_hz: f64,
    /// Keyed by channel number.
    pub overrides: BTreeMap<String, ChannelFeatures>,
}

impl Default for FeatureSection {
    fn default() -> Self {
        FeatureSection {
            family: Family::Lfcc,
            channels: (1..=MAX_CHANNELS).collect(),
            frames: 108,
            coeff_lo: 0,
            coeff_hi: 7,
            sbw_hz: 5.86,
            tbw_hz: 1000.0,
            overrides: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    pub mode: FusionMode,
    /// Channels used by `evaluate` and `predict`; defaults to every extracted channel.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<usize>>,
}

impl Default for FusionSection {
    fn default() -> Self {
        FusionSection {
            mode: FusionMode::FeatureLevel,
            channels: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<usize>>,
    /// Largest subset size to evaluate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSection {
    pub k: usize,
    pub iterations: usize,
    pub classifier: Classifier,
    pub ranking: RankingMethod,
    pub dims: DimSelection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    pub inner_k: usize,
}

impl Default for CvSection {
    fn default() -> Self {
        let fit = FitConfig::default();
        CvSection {
            k: 5,
            iterations: 20,
            classifier: fit.classifier,
            ranking: fit.ranking,
            dims: fit.dims,
            grid: fit.grid,
            inner_k: fit.inner_k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Features per channel shown in the box plots.
    pub top_features: usize,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection { top_features: 4 }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub strict: bool,
    pub paths: Paths,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub features: FeatureSection,
    #[serde(default)]
    pub fusion: FusionSection,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub cv: CvSection,
    #[serde(default)]
    pub report: ReportSection,
}

impl PipelineConfig {
    /// Parse a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        for p in [&mut cfg.paths.manifest, &mut cfg.paths.annotations, &mut cfg.paths.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Apply command-line overrides, then check everything that does not
    /// need the data on disk.
    pub fn resolve(mut self, seed: Option<u64>, strict: bool) -> Result<Self, CliError> {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.strict |= strict;
        self.preprocess.strict = self.strict;
        self.synth.params.validate().map_err(CliError::from_config)?;
        if self.features.channels.is_empty() {
            return Err(CliError::config("features.channels is empty"));
        }
        for &c in &self.features.channels {
            if !(1..=MAX_CHANNELS).contains(&c) {
                return Err(CliError::config(format!("channel {c} outside 1..={MAX_CHANNELS}")));
            }
        }
        for key in self.features.overrides.keys() {
            let c: usize = key
                .parse()
                .map_err(|_| CliError::config(format!("override key `{key}` is not a channel number")))?;
            if !self.features.channels.contains(&c) {
                return Err(CliError::config(format!("override for channel {c}, which is not extracted")));
            }
        }
        self.channel_specs()?;
        for list in [&self.fusion.channels, &self.search.channels].into_iter().flatten() {
            if list.is_empty() {
                return Err(CliError::config("channel list is empty"));
            }
            if let Some(c) = list.iter().find(|c| !self.features.channels.contains(c)) {
                return Err(CliError::config(format!("channel {c} is not in features.channels")));
            }
        }
        if self.search.max_size == Some(0) {
            return Err(CliError::config("search.max_size must be positive"));
        }
        self.cv_config().validate().map_err(CliError::from_config)?;
        Ok(self)
    }

    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            k: self.cv.k,
            iterations: self.cv.iterations,
            seed: self.seed,
            fit: FitConfig {
                classifier: self.cv.classifier,
                ranking: self.cv.ranking,
                dims: self.cv.dims,
                grid: self.cv.grid.clone(),
                inner_k: self.cv.inner_k,
                strict: self.strict,
            },
        }
    }

    /// Resolved feature configuration for every extracted channel.
    pub fn channel_specs(&self) -> Result<BTreeMap<usize, FeatureSpec>, CliError> {
        let f = &self.features;
        let mut out = BTreeMap::new();
        for &ch in &f.channels {
            let o = f.overrides.get(&ch.to_string()).cloned().unwrap_or_default();
            let family = o.family.unwrap_or(f.family);
            let spec = match family {
                Family::Psd => FeatureSpec::Psd(
                    SubbandConfig::new(o.sbw_hz.unwrap_or(f.sbw_hz), o.tbw_hz.unwrap_or(f.tbw_hz), self.strict)
                        .map_err(CliError::from_config)?,
                ),
                cep => {
                    let make = match cep {
                        Family::Lfcc => CepstralConfig::lfcc,
                        Family::Mfcc => CepstralConfig::mfcc,
                        _ => CepstralConfig::gfcc,
                    };
                    let c = make(
                        o.frames.unwrap_or(f.frames),
                        o.coeff_lo.unwrap_or(f.coeff_lo),
                        o.coeff_hi.unwrap_or(f.coeff_hi),
                    );
                    c.validate(self.strict)
                        .map_err(|e| CliError::config(format!("channel {ch}: {e}")))?;
                    FeatureSpec::Cepstral(c)
                }
            };
            out.insert(ch, spec);
        }
        Ok(out)
    }

    pub fn fusion_channels(&self) -> Vec<usize> {
        self.fusion.channels.clone().unwrap_or_else(|| self.features.channels.clone())
    }

    pub fn search_channels(&self) -> Vec<usize> {
        self.search.channels.clone().unwrap_or_else(|| self.features.channels.clone())
    }

    /// Inputs of the data stages must exist.
    pub fn require_inputs(&self) -> Result<(), CliError> {
        for (what, p) in [("manifest", &self.paths.manifest), ("annotations", &self.paths.annotations)] {
            if !p.is_file() {
                return Err(CliError::config(format!("{what} not found: {}", p.display())));
            }
        }
        Ok(())
    }
}
