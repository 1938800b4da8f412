//! Welch power spectral density and sub-band power features.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default Welch segment length (about 0.5 s at 2 kHz).
pub const WELCH_WINDOW: usize = 1024;
/// Supported sub-band widths. Each is an integer number of 1.953125 Hz bins.
pub const SBW_GRID_HZ: [f64; 8] = [5.86, 11.72, 17.58, 23.44, 29.30, 35.16, 46.88, 58.6];
/// Bins per band for each entry of [`SBW_GRID_HZ`].
pub const SBW_GRID_BINS: [usize; 8] = [3, 6, 9, 12, 15, 18, 24, 30];
/// Supported total bandwidths, 0 Hz up to the value.
pub const TBW_GRID_HZ: [f64; 8] = [300.0, 400.0, 500.0, 600.0, 700.0, 800.0, 900.0, 1000.0];

/// Periodic Hann window: `w(n) = 0.5 (1 - cos(2 pi n / N))` for `n` in `0..N`.
///
/// `w(0) = 0`, `w(N/2) = 1` for even `N`, and `w(n) = w(N - n)`.
pub fn hanning_window(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "window length must be at least 2, got {n}"
        )));
    }
    Ok((0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos()))
        .collect())
}

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub freqs_hz: Vec<f64>,
    /// Power per Hz at each entry of `freqs_hz`.
    pub density: Vec<f64>,
    pub bin_spacing_hz: f64,
}

impl PsdEstimate {
    /// Trapezoidal integral of the density between two bin indices (inclusive).
    pub fn integrate_bins(&self, lo: usize, hi: usize) -> f64 {
        self.density[lo..=hi]
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]) * self.bin_spacing_hz)
            .sum()
    }

    /// Integral over the whole one-sided band.
    pub fn total_power(&self) -> f64 {
        self.integrate_bins(0, self.density.len() - 1)
    }
}

/// Reusable Welch estimator with a planned FFT.
pub struct Welch {
    window: Vec<f64>,
    hop: usize,
    fft: Arc<dyn Fft<f64>>,
    window_power: f64,
}

impl Welch {
    pub fn new(win_len: usize, overlap: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&overlap) {
            return Err(Error::InvalidParameter(format!(
                "overlap must be in [0, 1), got {overlap}"
            )));
        }
        let window = hanning_window(win_len)?;
        let hop = ((win_len as f64) * (1.0 - overlap)).round().max(1.0) as usize;
        let fft = FftPlanner::new().plan_fft_forward(win_len);
        let window_power = window.iter().map(|w| w * w).sum();
        Ok(Welch {
            window,
            hop,
            fft,
            window_power,
        })
    }

    pub fn estimate(&self, x: &[f64], fs_hz: f64) -> Result<PsdEstimate> {
        let n = self.window.len();
        if x.len() < n {
            return Err(Error::TooShort {
                needed: n,
                got: x.len(),
            });
        }
        let n_seg = (x.len() - n) / self.hop + 1;
        let n_bins = n / 2 + 1;
        let mut acc = vec![0.0; n_bins];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for s in 0..n_seg {
            let seg = &x[s * self.hop..s * self.hop + n];
            for ((b, &v), &w) in buf.iter_mut().zip(seg).zip(&self.window) {
                *b = Complex64::new(v * w, 0.0);
            }
            self.fft.process(&mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += b.norm_sqr();
            }
        }
        let scale = 1.0 / (fs_hz * self.window_power * n_seg as f64);
        let density = acc
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let one_sided = if k == 0 || (n % 2 == 0 && k == n / 2) {
                    1.0
                } else {
                    2.0
                };
                p * scale * one_sided
            })
            .collect();
        let spacing = fs_hz / n as f64;
        Ok(PsdEstimate {
            freqs_hz: (0..n_bins).map(|k| k as f64 * spacing).collect(),
            density,
            bin_spacing_hz: spacing,
        })
    }
}

/// Welch PSD with a periodic Hann window, density-normalized so that the
/// integral over `[0, fs/2]` estimates the signal variance.
pub fn welch_psd(x: &[f64], fs_hz: f64, win_len: usize, overlap: f64) -> Result<PsdEstimate> {
    Welch::new(win_len, overlap)?.estimate(x, fs_hz)
}

/// Sub-band width and total bandwidth of the band-power feature grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubbandConfig {
    pub sbw_hz: f64,
    pub tbw_hz: f64,
}

impl SubbandConfig {
    /// In strict mode both widths must lie on the supported grids.
    pub fn new(sbw_hz: f64, tbw_hz: f64, strict: bool) -> Result<Self> {
        if !(sbw_hz > 0.0 && tbw_hz >= sbw_hz) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < sbw <= tbw, got sbw {sbw_hz}, tbw {tbw_hz}"
            )));
        }
        if strict {
            if !SBW_GRID_HZ.iter().any(|g| (g - sbw_hz).abs() < 0.01) {
                return Err(Error::UnsupportedSubband(sbw_hz));
            }
            if !TBW_GRID_HZ.iter().any(|g| (g - tbw_hz).abs() < 1e-9) {
                return Err(Error::InvalidParameter(format!(
                    "total bandwidth {tbw_hz} Hz not on the 300..1000 step 100 grid"
                )));
            }
        }
        Ok(SubbandConfig { sbw_hz, tbw_hz })
    }

    /// Bins per band at the given PSD resolution.
    pub fn bins_per_band(&self, spacing_hz: f64) -> usize {
        ((self.sbw_hz / spacing_hz).round() as usize).max(1)
    }

    /// Number of complete bands in `[0, tbw]`.
    pub fn n_bands(&self, spacing_hz: f64) -> usize {
        let width = self.bins_per_band(spacing_hz) as f64 * spacing_hz;
        (self.tbw_hz / width + 1e-9).floor() as usize
    }
}

/// Trapezoidal power in consecutive bands of width `sbw` over `[0, tbw]`.
///
/// The incomplete trailing band is dropped.
pub fn subband_powers(psd: &PsdEstimate, cfg: &SubbandConfig) -> Result<Vec<f64>> {
    let nyquist = psd.freqs_hz.last().copied().unwrap_or(0.0);
    if cfg.tbw_hz > nyquist + 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "total bandwidth {} Hz exceeds Nyquist {nyquist} Hz",
            cfg.tbw_hz
        )));
    }
    let m = cfg.bins_per_band(psd.bin_spacing_hz);
    let n_bands = cfg.n_bands(psd.bin_spacing_hz);
    Ok((0..n_bands)
        .map(|b| psd.integrate_bins(b * m, (b + 1) * m))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hann_identities() {
        let w = hanning_window(1024).unwrap();
        assert_eq!(w[0], 0.0);
        assert!((w[512] - 1.0).abs() < 1e-15);
        for n in 1..1024 {
            assert!((w[n] - w[1024 - n]).abs() < 1e-12);
        }
        assert!(hanning_window(1).is_err());
    }

    #[test]
    fn default_bin_spacing() {
        let psd = welch_psd(&vec![0.5; 2048], 2000.0, 1024, 0.5).unwrap();
        assert_eq!(psd.bin_spacing_hz, 1.953125);
        assert_eq!(psd.density.len(), 513);
        assert_eq!(*psd.freqs_hz.last().unwrap(), 1000.0);
    }

    #[test]
    fn too_short_rejected() {
        assert!(matches!(
            welch_psd(&[0.0; 1000], 2000.0, 1024, 0.5),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn sbw_grid_is_whole_bins() {
        for (&hz, &bins) in SBW_GRID_HZ.iter().zip(&SBW_GRID_BINS) {
            let cfg = SubbandConfig::new(hz, 1000.0, true).unwrap();
            assert_eq!(cfg.bins_per_band(1.953125), bins);
            assert!((bins as f64 * 1.953125 - hz).abs() < 0.01);
        }
        assert!(matches!(
            SubbandConfig::new(7.0, 1000.0, true),
            Err(Error::UnsupportedSubband(_))
        ));
        assert!(SubbandConfig::new(7.0, 1000.0, false).is_ok());
    }

    #[test]
    fn feature_count_uses_floor() {
        let cfg = SubbandConfig::new(58.6, 300.0, true).unwrap();
        assert_eq!(cfg.n_bands(1.953125), 5);
        let cfg = SubbandConfig::new(5.86, 1000.0, true).unwrap();
        assert_eq!(cfg.n_bands(1.953125), 170);
    }

    #[test]
    fn flat_density_band_is_height_times_width() {
        let spacing = 1.953125;
        let psd = PsdEstimate {
            freqs_hz: (0..513).map(|k| k as f64 * spacing).collect(),
            density: vec![0.7; 513],
            bin_spacing_hz: spacing,
        };
        let cfg = SubbandConfig::new(11.72, 300.0, true).unwrap();
        let f = subband_powers(&psd, &cfg).unwrap();
        assert_eq!(f.len(), 25);
        for v in f {
            assert!((v - 0.7 * 6.0 * spacing).abs() < 1e-12);
        }
    }
}
