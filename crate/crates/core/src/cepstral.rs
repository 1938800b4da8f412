//! Epoch framing and cepstral coefficients over linear, mel, or gammatone
//! filter banks (LFCC / MFCC / GFCC).
//!
//! Each epoch is cut into a fixed number of half-overlapping frames, so frame
//! length follows the subject's heart rate. Per frame: Hann window, power
//! spectrum, filter-bank energies, natural log (floored), orthonormal DCT-II.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::hanning_window;

/// Energies are clamped here before the logarithm.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterScale {
    Linear,
    Mel,
    Gammatone,
}

impl fmt::Display for FilterScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterScale::Linear => "lfcc",
            FilterScale::Mel => "mfcc",
            FilterScale::Gammatone => "gfcc",
        })
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Equivalent rectangular bandwidth in Hz.
pub fn erb(f: f64) -> f64 {
    24.7 * (4.37 * f / 1000.0 + 1.0)
}

/// ERB-rate (number of ERBs below `f`).
pub fn hz_to_erb_rate(f: f64) -> f64 {
    21.4 * (1.0 + 4.37 * f / 1000.0).log10()
}

pub fn erb_rate_to_hz(e: f64) -> f64 {
    (10f64.powf(e / 21.4) - 1.0) * 1000.0 / 4.37
}

/// Lowest gammatone center frequency.
pub const GAMMATONE_FMIN_HZ: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CepstralConfig {
    pub scale: FilterScale,
    pub num_filters: usize,
    pub fmax_hz: f64,
    pub num_frames: usize,
    pub coeff_lo: usize,
    pub coeff_hi: usize,
}

impl CepstralConfig {
    fn with(scale: FilterScale, num_filters: usize, frames: usize, lo: usize, hi: usize) -> Self {
        CepstralConfig {
            scale,
            num_filters,
            fmax_hz: 1000.0,
            num_frames: frames,
            coeff_lo: lo,
            coeff_hi: hi,
        }
    }

    /// 12 linearly spaced triangular filters up to 1 kHz.
    pub fn lfcc(num_frames: usize, coeff_lo: usize, coeff_hi: usize) -> Self {
        Self::with(FilterScale::Linear, 12, num_frames, coeff_lo, coeff_hi)
    }

    /// 12 mel-spaced triangular filters up to 1 kHz.
    pub fn mfcc(num_frames: usize, coeff_lo: usize, coeff_hi: usize) -> Self {
        Self::with(FilterScale::Mel, 12, num_frames, coeff_lo, coeff_hi)
    }

    /// 14 gammatone filters, ERB-spaced from 50 Hz to 1 kHz.
    pub fn gfcc(num_frames: usize, coeff_lo: usize, coeff_hi: usize) -> Self {
        Self::with(FilterScale::Gammatone, 14, num_frames, coeff_lo, coeff_hi)
    }

    pub fn coeffs_per_frame(&self) -> usize {
        self.coeff_hi - self.coeff_lo + 1
    }

    pub fn feature_dim(&self) -> usize {
        self.num_frames * self.coeffs_per_frame()
    }

    /// Frame counts investigated: 20..=64 and 100..=112, even only.
    pub fn frame_grid() -> Vec<usize> {
        (20..=64).step_by(2).chain((100..=112).step_by(2)).collect()
    }

    pub fn validate(&self, strict: bool) -> Result<()> {
        if self.num_filters < 1 {
            return Err(Error::InvalidParameter("num_filters must be >= 1".into()));
        }
        if self.coeff_lo > self.coeff_hi || self.coeff_hi >= self.num_filters {
            return Err(Error::InvalidParameter(format!(
                "coefficient range {}..={} invalid for {} filters",
                self.coeff_lo, self.coeff_hi, self.num_filters
            )));
        }
        if self.num_frames < 1 {
            return Err(Error::InvalidParameter("num_frames must be >= 1".into()));
        }
        if strict && !Self::frame_grid().contains(&self.num_frames) {
            return Err(Error::InvalidParameter(format!(
                "frame count {} not in 20..=64 or 100..=112 (even)",
                self.num_frames
            )));
        }
        Ok(())
    }
}

/// Frame length and hop for `n_samples` cut into `num_frames` half-overlapping frames.
pub fn frame_geometry(n_samples: usize, num_frames: usize) -> Result<(usize, usize)> {
    if num_frames == 0 || n_samples < num_frames + 1 {
        return Err(Error::TooShort {
            needed: num_frames + 1,
            got: n_samples,
        });
    }
    let len = 2 * n_samples / (num_frames + 1);
    let hop = (len / 2).max(1);
    Ok((len, hop))
}

/// Split an epoch into exactly `num_frames` frames with 50% overlap.
pub fn frame_epoch(epoch: &[f64], num_frames: usize) -> Result<Vec<&[f64]>> {
    let (len, hop) = frame_geometry(epoch.len(), num_frames)?;
    Ok((0..num_frames)
        .map(|i| &epoch[i * hop..i * hop + len])
        .collect())
}

/// Filter responses sampled on the non-negative FFT bins.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    /// `responses[k][bin]`, each in [0, 1].
    pub responses: Vec<Vec<f64>>,
    pub centers_hz: Vec<f64>,
    pub scale: FilterScale,
    pub n_fft: usize,
    pub fs_hz: f64,
}

/// Triangular response of one filter with edges `lo < center < hi`.
pub fn triangle(f: f64, lo: f64, center: f64, hi: f64) -> f64 {
    if f < lo || f >= hi {
        0.0
    } else if f < center {
        (f - lo) / (center - lo)
    } else {
        (hi - f) / (hi - center)
    }
}

/// Edge frequencies `f_0..f_{K+1}` for triangular banks.
pub fn triangular_edges(scale: FilterScale, num_filters: usize, fmax_hz: f64) -> Vec<f64> {
    let n = num_filters + 1;
    match scale {
        FilterScale::Mel => {
            let top = hz_to_mel(fmax_hz);
            (0..=n)
                .map(|j| mel_to_hz(top * j as f64 / n as f64))
                .collect()
        }
        _ => (0..=n).map(|j| fmax_hz * j as f64 / n as f64).collect(),
    }
}

impl FilterBank {
    pub fn build(cfg: &CepstralConfig, n_fft: usize, fs_hz: f64) -> Result<Self> {
        if cfg.num_filters < 1 {
            return Err(Error::InvalidParameter("num_filters must be >= 1".into()));
        }
        if cfg.fmax_hz > fs_hz / 2.0 + 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "fmax {} Hz exceeds Nyquist {} Hz",
                cfg.fmax_hz,
                fs_hz / 2.0
            )));
        }
        if n_fft < 2 {
            return Err(Error::InvalidParameter("n_fft must be >= 2".into()));
        }
        let n_bins = n_fft / 2 + 1;
        let bin_hz = |b: usize| b as f64 * fs_hz / n_fft as f64;
        let k = cfg.num_filters;

        let (responses, centers_hz) = match cfg.scale {
            FilterScale::Linear | FilterScale::Mel => {
                let edges = triangular_edges(cfg.scale, k, cfg.fmax_hz);
                let rows = (1..=k)
                    .map(|i| {
                        (0..n_bins)
                            .map(|b| triangle(bin_hz(b), edges[i - 1], edges[i], edges[i + 1]))
                            .collect()
                    })
                    .collect();
                (rows, edges[1..=k].to_vec())
            }
            FilterScale::Gammatone => {
                let lo = hz_to_erb_rate(GAMMATONE_FMIN_HZ);
                let hi = hz_to_erb_rate(cfg.fmax_hz);
                let centers: Vec<f64> = (0..k)
                    .map(|i| {
                        let t = if k == 1 {
                            0.0
                        } else {
                            i as f64 / (k - 1) as f64
                        };
                        erb_rate_to_hz(lo + t * (hi - lo))
                    })
                    .collect();
                let rows = centers
                    .iter()
                    .map(|&fc| {
                        let b = 1.019 * erb(fc);
                        // 4th-order gammatone magnitude, unit peak at fc
                        (0..n_bins)
                            .map(|bin| {
                                let u = (bin_hz(bin) - fc) / b;
                                (1.0 + u * u).powi(-2)
                            })
                            .collect()
                    })
                    .collect();
                (rows, centers)
            }
        };
        Ok(FilterBank {
            responses,
            centers_hz,
            scale: cfg.scale,
            n_fft,
            fs_hz,
        })
    }

    pub fn num_filters(&self) -> usize {
        self.responses.len()
    }

    /// Energies `sum_bin H_k(bin) * power[bin]`.
    pub fn energies(&self, power: &[f64]) -> Vec<f64> {
        self.responses
            .iter()
            .map(|row| row.iter().zip(power).map(|(h, p)| h * p).sum())
            .collect()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct BankKey {
    scale: FilterScale,
    num_filters: usize,
    fmax_bits: u64,
    n_fft: usize,
    fs_bits: u64,
}

type BankCache = RwLock<HashMap<BankKey, Arc<FilterBank>>>;

fn bank_cache() -> &'static BankCache {
    static CACHE: OnceLock<BankCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Shared, memoized filter bank for `(scale, filters, fmax, n_fft, fs)`.
pub fn cached_filterbank(cfg: &CepstralConfig, n_fft: usize, fs_hz: f64) -> Result<Arc<FilterBank>> {
    let key = BankKey {
        scale: cfg.scale,
        num_filters: cfg.num_filters,
        fmax_bits: cfg.fmax_hz.to_bits(),
        n_fft,
        fs_bits: fs_hz.to_bits(),
    };
    if let Some(fb) = bank_cache()
        .read()
        .unwrap_or_else(|p| p.into_inner())
        .get(&key)
    {
        return Ok(Arc::clone(fb));
    }
    let fb = Arc::new(FilterBank::build(cfg, n_fft, fs_hz)?);
    let mut guard = bank_cache().write().unwrap_or_else(|p| p.into_inner());
    Ok(Arc::clone(guard.entry(key).or_insert(fb)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DctNorm {
    /// `sum_n x_n cos(pi i (n + 1/2) / N)` with no scaling.
    None,
    /// Scaled so the transform matrix is orthogonal.
    Ortho,
}

/// DCT-II of `x`.
pub fn dct_ii(x: &[f64], norm: DctNorm) -> Vec<f64> {
    let n = x.len();
    let nf = n as f64;
    (0..n)
        .map(|i| {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(j, v)| v * (PI / nf * i as f64 * (j as f64 + 0.5)).cos())
                .sum();
            match norm {
                DctNorm::None => s,
                DctNorm::Ortho if i == 0 => s * (1.0 / nf).sqrt(),
                DctNorm::Ortho => s * (2.0 / nf).sqrt(),
            }
        })
        .collect()
}

/// Inverse of the orthonormal DCT-II (an orthonormal DCT-III).
pub fn idct_ii_ortho(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let nf = n as f64;
    (0..n)
        .map(|j| {
            c.iter()
                .enumerate()
                .map(|(i, v)| {
                    let s = if i == 0 {
                        (1.0 / nf).sqrt()
                    } else {
                        (2.0 / nf).sqrt()
                    };
                    s * v * (PI / nf * i as f64 * (j as f64 + 0.5)).cos()
                })
                .sum()
        })
        .collect()
}

/// Per-frame cepstral front end for one frame length.
struct FrameAnalyzer {
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    bank: Arc<FilterBank>,
    /// Orthonormal DCT rows `coeff_lo..=coeff_hi`.
    dct_rows: Vec<Vec<f64>>,
    buf: Vec<Complex64>,
    power: Vec<f64>,
}

impl FrameAnalyzer {
    fn new(frame_len: usize, bank: Arc<FilterBank>, coeff_lo: usize, coeff_hi: usize) -> Result<Self> {
        let n = bank.num_filters();
        if coeff_lo > coeff_hi || coeff_hi >= n {
            return Err(Error::InvalidParameter(format!(
                "coefficient range {coeff_lo}..={coeff_hi} invalid for {n} filters"
            )));
        }
        if frame_len > bank.n_fft {
            return Err(Error::DimensionMismatch {
                expected: bank.n_fft,
                got: frame_len,
            });
        }
        let nf = n as f64;
        let dct_rows = (coeff_lo..=coeff_hi)
            .map(|i| {
                let s = if i == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                (0..n)
                    .map(|j| s * (PI / nf * i as f64 * (j as f64 + 0.5)).cos())
                    .collect()
            })
            .collect();
        Ok(FrameAnalyzer {
            window: hanning_window(frame_len)?,
            fft: FftPlanner::new().plan_fft_forward(bank.n_fft),
            buf: vec![Complex64::new(0.0, 0.0); bank.n_fft],
            power: vec![0.0; bank.n_fft / 2 + 1],
            bank,
            dct_rows,
        })
    }

    fn analyze(&mut self, frame: &[f64], out: &mut Vec<f64>) {
        for (i, b) in self.buf.iter_mut().enumerate() {
            *b = match frame.get(i) {
                Some(&v) => Complex64::new(v * self.window[i], 0.0),
                None => Complex64::new(0.0, 0.0),
            };
        }
        self.fft.process(&mut self.buf);
        for (p, b) in self.power.iter_mut().zip(&self.buf) {
            *p = b.norm_sqr();
        }
        let log_e: Vec<f64> = self
            .bank
            .energies(&self.power)
            .into_iter()
            .map(|e| e.max(LOG_FLOOR).ln())
            .collect();
        out.extend(
            self.dct_rows
                .iter()
                .map(|row| row.iter().zip(&log_e).map(|(c, x)| c * x).sum::<f64>()),
        );
    }
}

/// Cepstral coefficients `coeff_lo..=coeff_hi` of one frame.
pub fn frame_cepstra(frame: &[f64], bank: &Arc<FilterBank>, coeff_lo: usize, coeff_hi: usize) -> Result<Vec<f64>> {
    if frame.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: frame.len(),
        });
    }
    let mut analyzer = FrameAnalyzer::new(frame.len(), Arc::clone(bank), coeff_lo, coeff_hi)?;
    let mut out = Vec::with_capacity(coeff_hi - coeff_lo + 1);
    analyzer.analyze(frame, &mut out);
    Ok(out)
}

/// Frame-major concatenation of per-frame coefficients.
pub fn epoch_feature_vector(epoch: &[f64], cfg: &CepstralConfig, fs_hz: f64) -> Result<Vec<f64>> {
    cfg.validate(false)?;
    let frames = frame_epoch(epoch, cfg.num_frames)?;
    let frame_len = frames[0].len();
    if frame_len < 2 {
        return Err(Error::TooShort {
            needed: 2 * (cfg.num_frames + 1),
            got: epoch.len(),
        });
    }
    let n_fft = frame_len.next_power_of_two();
    let bank = cached_filterbank(cfg, n_fft, fs_hz)?;
    let mut analyzer = FrameAnalyzer::new(frame_len, bank, cfg.coeff_lo, cfg.coeff_hi)?;
    let mut out = Vec::with_capacity(cfg.feature_dim());
    for frame in frames {
        analyzer.analyze(frame, &mut out);
    }
    Ok(out)
}
