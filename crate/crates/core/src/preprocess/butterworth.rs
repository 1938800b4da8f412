//! Low-pass Butterworth design as cascaded biquads.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Order and cut-off of a maximally-flat low-pass filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSpec {
    pub order: usize,
    pub cutoff_hz: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            order: 8,
            cutoff_hz: 1000.0,
        }
    }
}

/// One second-order section, normalized so `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Complex response magnitude at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, fs_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / fs_hz;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let nr = self.b[0] + self.b[1] * c1 + self.b[2] * c2;
        let ni = self.b[1] * s1 + self.b[2] * s2;
        let dr = 1.0 + self.a[0] * c1 + self.a[1] * c2;
        let di = self.a[0] * s1 + self.a[1] * s2;
        ((nr * nr + ni * ni) / (dr * dr + di * di)).sqrt()
    }
}

/// Cascade of biquads realizing an even-order Butterworth low-pass.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
}

impl SosFilter {
    /// Bilinear-transform design with the cutoff prewarped so the digital
    /// response is exactly -3.01 dB at `cutoff_hz`.
    pub fn butterworth_lowpass(spec: FilterSpec, fs_hz: f64) -> Result<Self> {
        let nyquist = fs_hz / 2.0;
        if !(spec.cutoff_hz > 0.0) || spec.cutoff_hz >= nyquist {
            return Err(Error::CutoffAboveNyquist {
                cutoff_hz: spec.cutoff_hz,
                nyquist_hz: nyquist,
            });
        }
        if spec.order == 0 || spec.order % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "Butterworth order must be even and positive, got {}",
                spec.order
            )));
        }
        let k = (PI * spec.cutoff_hz / fs_hz).tan();
        let k2 = k * k;
        let n = spec.order as f64;
        let sections = (0..spec.order / 2)
            .map(|i| {
                // pole pair at angle psi from the negative real axis
                let psi = PI * (2 * i + 1) as f64 / (2.0 * n);
                let two_zeta = 2.0 * psi.cos();
                let norm = 1.0 + two_zeta * k + k2;
                let b0 = k2 / norm;
                Biquad {
                    b: [b0, 2.0 * b0, b0],
                    a: [2.0 * (k2 - 1.0) / norm, (1.0 - two_zeta * k + k2) / norm],
                }
            })
            .collect();
        Ok(SosFilter { sections })
    }

    pub fn magnitude(&self, freq_hz: f64, fs_hz: f64) -> f64 {
        self.sections
            .iter()
            .map(|s| s.magnitude(freq_hz, fs_hz))
            .product()
    }

    /// Causal filtering from zero initial state (transposed direct form II).
    pub fn apply(&self, signal: &[f64]) -> Vec<f64> {
        let mut out = signal.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for x in out.iter_mut() {
                let input = *x;
                let y = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[0] * y + z2;
                z2 = s.b[2] * input - s.a[1] * y;
                *x = y;
            }
        }
        out
    }
}

/// Low-pass filter `signal` sampled at `fs_hz`.
pub fn lowpass_filter(signal: &[f64], spec: FilterSpec, fs_hz: f64) -> Result<Vec<f64>> {
    Ok(SosFilter::butterworth_lowpass(spec, fs_hz)?.apply(signal))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 7812.5;

    fn db(x: f64) -> f64 {
        20.0 * x.log10()
    }

    #[test]
    fn unit_dc_gain() {
        let y = lowpass_filter(&vec![1.0; 4000], FilterSpec::default(), FS).unwrap();
        assert!((y[3999] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn minus_three_db_at_cutoff() {
        let f = SosFilter::butterworth_lowpass(FilterSpec::default(), FS).unwrap();
        assert_eq!(f.sections.len(), 4);
        let at_cut = db(f.magnitude(1000.0, FS));
        assert!((at_cut + 3.0103).abs() < 0.1, "{at_cut}");
    }

    #[test]
    fn stopband_matches_warped_prototype() {
        // the bilinear map sends digital f to analog tan(pi f / fs); the
        // digital response equals the analog prototype at that frequency
        let f = SosFilter::butterworth_lowpass(FilterSpec::default(), FS).unwrap();
        let ratio = (PI * 1500.0 / FS).tan() / (PI * 1000.0 / FS).tan();
        let expected = 10.0 * (1.0 + ratio.powi(16)).log10();
        let got = -db(f.magnitude(1500.0, FS));
        assert!((got - expected).abs() < 0.01, "{got} vs {expected}");
        // and it is at least as steep as the unwarped analog prototype
        let unwarped = 10.0 * (1.0 + 1.5f64.powi(16)).log10();
        assert!(got > unwarped);
    }

    #[test]
    fn monotone_magnitude() {
        let f = SosFilter::butterworth_lowpass(FilterSpec::default(), FS).unwrap();
        let mut last = f64::INFINITY;
        for i in 0..390 {
            let m = f.magnitude(i as f64 * 10.0, FS);
            assert!(m <= last + 1e-12);
            last = m;
        }
    }

    #[test]
    fn cutoff_at_nyquist_rejected() {
        let spec = FilterSpec {
            order: 8,
            cutoff_hz: 1000.0,
        };
        assert!(matches!(
            lowpass_filter(&[0.0], spec, 2000.0),
            Err(Error::CutoffAboveNyquist { .. })
        ));
    }
}
