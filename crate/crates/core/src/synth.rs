//! Synthetic multi-channel heart-sound recordings with epoch annotations.
//!
//! Each beat has a band-limited S1 burst at its onset and an S2 burst at the
//! end of systole. CAD subjects add band-limited murmur noise over systole
//! and early diastole. Channels see the same heart signal with their own
//! gain and fractional delay, plus independent ambient noise.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dataio::{
    write_annotations, write_manifest, write_recording, Cohort, DatasetManifest, EpochAnnotations, EpochSpan, Label,
    ManifestEntry, Recording, SampleEncoding, EPOCHS_PER_SUBJECT, MAX_CHANNELS,
};
use crate::error::{Error, Result};
use crate::preprocess::TARGET_FS_HZ;

pub const SYNTH_FS_HZ: f64 = 7812.5;
pub const SYNTH_DURATION_S: f64 = 10.0;

const S1_DURATION_S: f64 = 0.10;
const S2_DURATION_S: f64 = 0.08;
const FIRST_ONSET_S: f64 = 0.25;
/// Fraction of diastole covered by the murmur after S2.
const EARLY_DIASTOLE: f64 = 0.4;
const PEAK: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub heart_rate_bpm: f64,
    pub s1_band_hz: (f64, f64),
    pub s2_band_hz: (f64, f64),
    pub murmur_band_hz: (f64, f64),
    /// Murmur power over its envelope relative to S1 power over its bursts.
    pub murmur_rel_power: f64,
    pub channel_gains: [f64; MAX_CHANNELS],
    pub channel_delays_ms: [f64; MAX_CHANNELS],
    /// Ambient noise standard deviation relative to the S1 burst RMS.
    pub ambient_noise_std: f64,
    pub rng_seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            heart_rate_bpm: 72.0,
            s1_band_hz: (20.0, 150.0),
            s2_band_hz: (20.0, 200.0),
            murmur_band_hz: (200.0, 600.0),
            murmur_rel_power: 0.3,
            channel_gains: [1.0, 0.9, 1.1, 0.8, 1.0, 1.2, 0.95],
            channel_delays_ms: [0.0, 0.4, 0.8, 1.2, 1.6, 2.0, 2.4],
            ambient_noise_std: noise_std_from_db(-20.0),
            rng_seed: 0,
        }
    }
}

/// Amplitude ratio for a level given in dB.
pub fn noise_std_from_db(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("s1_band_hz", self.s1_band_hz),
            ("s2_band_hz", self.s2_band_hz),
            ("murmur_band_hz", self.murmur_band_hz),
        ] {
            if !(lo > 0.0 && hi > lo && hi < 1000.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must satisfy 0 < lo < hi < 1000, got ({lo}, {hi})"
                )));
            }
        }
        if self.channel_gains.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::InvalidParameter("channel gains must be > 0".into()));
        }
        if !(self.murmur_rel_power >= 0.0) || !(self.ambient_noise_std >= 0.0) {
            return Err(Error::InvalidParameter(
                "murmur_rel_power and ambient_noise_std must be >= 0".into(),
            ));
        }
        if !(self.heart_rate_bpm >= 40.0 && self.heart_rate_bpm <= 110.0) {
            return Err(Error::InvalidParameter(format!(
                "heart rate {} bpm outside 40..=110",
                self.heart_rate_bpm
            )));
        }
        if self.channel_delays_ms.iter().any(|d| !d.is_finite() || d.abs() > 50.0) {
            return Err(Error::InvalidParameter("channel delays must be within ±50 ms".into()));
        }
        Ok(())
    }
}

struct Spectral {
    planner: FftPlanner<f64>,
    n: usize,
}

impl Spectral {
    fn forward(&mut self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.planner.plan_fft_forward(self.n).process(&mut buf);
        buf
    }

    fn inverse(&mut self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.planner.plan_fft_inverse(self.n).process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    fn freq(&self, k: usize, fs: f64) -> f64 {
        let k = if k <= self.n / 2 { k as f64 } else { k as f64 - self.n as f64 };
        k * fs / self.n as f64
    }

    /// White Gaussian noise restricted to `lo..=hi` Hz, scaled to unit RMS.
    fn band_noise(&mut self, rng: &mut ChaCha8Rng, (lo, hi): (f64, f64), fs: f64) -> Vec<f64> {
        let white: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
        let mut spec = self.forward(&white);
        for (k, c) in spec.iter_mut().enumerate() {
            let f = self.freq(k, fs).abs();
            if f < lo || f > hi {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        let x = self.inverse(spec);
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        x.iter().map(|v| v / rms).collect()
    }

    /// Circular fractional delay by a unit-magnitude phase ramp.
    fn delay(&mut self, x: &[f64], seconds: f64, fs: f64) -> Vec<f64> {
        if seconds == 0.0 {
            return x.to_vec();
        }
        let mut spec = self.forward(x);
        for (k, c) in spec.iter_mut().enumerate() {
            let f = self.freq(k, fs);
            if self.n % 2 == 0 && k == self.n / 2 {
                // keep the Nyquist bin real
                *c *= (2.0 * PI * f * seconds).cos();
            } else {
                *c *= Complex64::from_polar(1.0, -2.0 * PI * f * seconds);
            }
        }
        self.inverse(spec)
    }
}

fn hann_burst(out: &mut [f64], source: &[f64], start: usize, len: usize) {
    for i in 0..len {
        let t = start + i;
        if t >= out.len() {
            break;
        }
        let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos();
        out[t] += w * source[t];
    }
}

/// Flat-topped envelope with raised-cosine ramps on `[start, end)`.
fn tapered(env: &mut [f64], start: usize, end: usize, ramp: usize) {
    let end = end.min(env.len());
    if end <= start {
        return;
    }
    let len = end - start;
    let ramp = ramp.min(len / 2).max(1);
    for i in 0..len {
        let edge = i.min(len - 1 - i);
        let w = if edge >= ramp {
            1.0
        } else {
            0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
        };
        env[start + i] = env[start + i].max(w);
    }
}

/// Beat onset times in seconds for a subject.
pub fn beat_onsets(heart_rate_bpm: f64) -> Vec<f64> {
    let period = 60.0 / heart_rate_bpm;
    let mut t = FIRST_ONSET_S;
    let mut out = Vec::new();
    while t < SYNTH_DURATION_S {
        out.push(t);
        t += period;
    }
    out
}

/// Generate one subject's 7-channel recording and its three epoch spans.
pub fn synth_subject(subject_id: &str, label: Label, params: &SynthParams, seed: u64) -> Result<(Recording, EpochAnnotations)> {
    params.validate()?;
    let fs = SYNTH_FS_HZ;
    let n = (SYNTH_DURATION_S * fs).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sp = Spectral {
        planner: FftPlanner::new(),
        n,
    };
    let period = 60.0 / params.heart_rate_bpm;
    let systole = 0.1 + 0.25 * period;
    let onsets = beat_onsets(params.heart_rate_bpm);

    let s1_src = sp.band_noise(&mut rng, params.s1_band_hz, fs);
    let s2_src = sp.band_noise(&mut rng, params.s2_band_hz, fs);
    let murmur_src = sp.band_noise(&mut rng, params.murmur_band_hz, fs);

    let s1_len = (S1_DURATION_S * fs).round() as usize;
    let s2_len = (S2_DURATION_S * fs).round() as usize;
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    let mut env = vec![0.0; n];
    for &t0 in &onsets {
        let a = (t0 * fs).round() as usize;
        let b = ((t0 + systole) * fs).round() as usize;
        hann_burst(&mut s1, &s1_src, a, s1_len);
        hann_burst(&mut s2, &s2_src, b, s2_len);
        let diastole = period - systole;
        tapered(&mut env, a + s1_len / 2, b, (0.02 * fs) as usize);
        let d0 = b + s2_len / 2;
        let d1 = ((t0 + systole + S2_DURATION_S / 2.0 + EARLY_DIASTOLE * diastole) * fs).round() as usize;
        tapered(&mut env, d0, d1, (0.02 * fs) as usize);
    }
    let burst_power = |x: &[f64]| {
        let active: Vec<f64> = x.iter().copied().filter(|v| *v != 0.0).collect();
        active.iter().map(|v| v * v).sum::<f64>() / active.len().max(1) as f64
    };
    let p_s1 = burst_power(&s1);
    let s1_rms = p_s1.sqrt();

    let mut heart: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| a + 0.8 * b).collect();
    if label.is_cad() && params.murmur_rel_power > 0.0 {
        let shaped: Vec<f64> = murmur_src.iter().zip(&env).map(|(m, e)| m * e).collect();
        let p_m = burst_power(&shaped);
        let scale = (params.murmur_rel_power * p_s1 / p_m).sqrt();
        for (h, m) in heart.iter_mut().zip(&shaped) {
            *h += scale * m;
        }
    }

    let mut channels = Vec::with_capacity(MAX_CHANNELS);
    for c in 0..MAX_CHANNELS {
        let delayed = sp.delay(&heart, params.channel_delays_ms[c] / 1000.0, fs);
        let g = params.channel_gains[c];
        let ch: Vec<f64> = delayed
            .iter()
            .map(|v| g * v + params.ambient_noise_std * s1_rms * rng.sample::<f64, _>(StandardNormal))
            .collect();
        channels.push(ch);
    }
    let peak = channels
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        for ch in &mut channels {
            ch.iter_mut().for_each(|v| *v *= PEAK / peak);
        }
    }

    // epoch e covers beats 1 + 2e and 2 + 2e (two full cycles)
    let to_target = |t: f64| (t * TARGET_FS_HZ).round() as usize;
    let spans = (0..EPOCHS_PER_SUBJECT)
        .map(|e| {
            let (b0, b1) = (1 + 2 * e, 3 + 2 * e);
            if b1 >= onsets.len() {
                return Err(Error::InvalidParameter("heart rate too low for three epochs".into()));
            }
            Ok(EpochSpan {
                subject_id: subject_id.to_string(),
                epoch_idx: e,
                start_sample: to_target(onsets[b0]),
                end_sample: to_target(onsets[b1]),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let rec = Recording::new(subject_id, channels, fs, SampleEncoding::Float32)?;
    Ok((rec, EpochAnnotations::new(spans, true)?))
}

/// A generated dataset held in memory.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub manifest: DatasetManifest,
    pub recordings: Vec<Recording>,
    pub annotations: EpochAnnotations,
}

impl SynthDataset {
    /// Write `manifest.csv`, `annotations.csv`, and one waveform per subject into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (rec, entry) in self.recordings.iter().zip(&self.manifest.entries) {
            write_recording(dir.join(&entry.path), rec)?;
        }
        let manifest = DatasetManifest {
            entries: self
                .manifest
                .entries
                .iter()
                .map(|e| ManifestEntry {
                    path: dir.join(&e.path),
                    ..e.clone()
                })
                .collect(),
        };
        let m = dir.join("manifest.csv");
        let a = dir.join("annotations.csv");
        write_manifest(&m, &manifest)?;
        write_annotations(&a, &self.annotations)?;
        Ok((m, a))
    }
}

/// Balanced training cohort of `n_per_class` subjects per label.
pub fn synth_dataset(n_per_class: usize, params: &SynthParams, seed: u64) -> Result<SynthDataset> {
    synth_dataset_with_heldout(n_per_class, 0, params, seed)
}

/// Training cohort plus `heldout_per_class` held-out subjects per label.
/// Heart rate is jittered by ±10% and channel gains by ±20% per subject.
pub fn synth_dataset_with_heldout(
    n_per_class: usize,
    heldout_per_class: usize,
    params: &SynthParams,
    seed: u64,
) -> Result<SynthDataset> {
    if n_per_class == 0 {
        return Err(Error::InvalidParameter("n_per_class must be >= 1".into()));
    }
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jobs: Vec<(Cohort, Label, String, SynthParams, u64)> = Vec::new();
    for (cohort, count, prefix) in [
        (Cohort::Train, n_per_class, "s"),
        (Cohort::Heldout, heldout_per_class, "h"),
    ] {
        for label in [Label::Cad, Label::Normal] {
            for _ in 0..count {
                let mut p = params.clone();
                p.heart_rate_bpm *= rng.random_range(0.9..=1.1);
                for g in p.channel_gains.iter_mut() {
                    *g *= rng.random_range(0.8..=1.2);
                }
                let id = format!("{prefix}{:03}", jobs.iter().filter(|(c, ..)| *c == cohort).count() + 1);
                jobs.push((cohort, label, id, p, rng.next_u64()));
            }
        }
    }
    use rayon::prelude::*;
    let generated = jobs
        .par_iter()
        .map(|(_, label, id, p, s)| synth_subject(id, *label, p, *s))
        .collect::<Result<Vec<_>>>()?;
    let mut entries = Vec::new();
    let mut recordings = Vec::new();
    let mut spans = Vec::new();
    for ((cohort, label, id, _, _), (rec, ann)) in jobs.into_iter().zip(generated) {
        entries.push(ManifestEntry {
            path: PathBuf::from(format!("{id}.wav")),
            subject_id: id,
            label,
            cohort,
        });
        recordings.push(rec);
        spans.extend(ann.spans);
    }
    Ok(SynthDataset {
        manifest: DatasetManifest { entries },
        recordings,
        annotations: EpochAnnotations::new(spans, true)?,
    })
}
