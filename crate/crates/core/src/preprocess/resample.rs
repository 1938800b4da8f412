//! Polyphase rational resampling with a Kaiser-windowed sinc filter.

use std::f64::consts::PI;

use crate::error::{Error, Result};

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Reduce `fs_out / fs_in` to `up / down` in lowest terms.
///
/// Both rates must become integers after scaling by some denominator up to
/// 1000 (covers rates such as 7812.5 Hz or 44.1 kHz).
pub fn rational_ratio(fs_in: f64, fs_out: f64) -> Result<(u64, u64)> {
    let bad = || Error::IrrationalRate { fs_in, fs_out };
    if !(fs_in > 0.0 && fs_out > 0.0) || !fs_in.is_finite() || !fs_out.is_finite() {
        return Err(bad());
    }
    for d in 1..=1000u64 {
        let a = fs_in * d as f64;
        let b = fs_out * d as f64;
        if (a - a.round()).abs() < 1e-9 && (b - b.round()).abs() < 1e-9 {
            let (a, b) = (a.round() as u64, b.round() as u64);
            let g = gcd(a, b);
            return Ok((b / g, a / g));
        }
    }
    Err(bad())
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Polyphase resampler for a fixed rational ratio.
#[derive(Debug, Clone)]
pub struct Resampler {
    up: usize,
    down: usize,
    half_len: usize,
    /// `phases[p][j]` is tap `p + j*up` of the prototype filter.
    phases: Vec<Vec<f64>>,
}

impl Resampler {
    const KAISER_BETA: f64 = 5.0;
    const HALF_LEN_PER_RATE: usize = 10;

    pub fn new(fs_in: f64, fs_out: f64) -> Result<Self> {
        let (up, down) = rational_ratio(fs_in, fs_out)?;
        Ok(Self::from_ratio(up as usize, down as usize))
    }

    pub fn from_ratio(up: usize, down: usize) -> Self {
        let max_rate = up.max(down);
        // cutoff as a fraction of the upsampled Nyquist
        let cutoff = 1.0 / max_rate as f64;
        let half_len = Self::HALF_LEN_PER_RATE * max_rate;
        let len = 2 * half_len + 1;
        let i0_beta = bessel_i0(Self::KAISER_BETA);
        let taps: Vec<f64> = (0..len)
            .map(|n| {
                let t = n as f64 - half_len as f64;
                let sinc = if t == 0.0 {
                    1.0
                } else {
                    (PI * cutoff * t).sin() / (PI * cutoff * t)
                };
                let r = t / half_len as f64;
                let w = bessel_i0(Self::KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
                cutoff * sinc * w
            })
            .collect();

        // split into polyphase branches, each normalized to unit DC gain
        let mut phases: Vec<Vec<f64>> = (0..up)
            .map(|p| taps.iter().skip(p).step_by(up).copied().collect())
            .collect();
        for branch in &mut phases {
            let s: f64 = branch.iter().sum();
            if s.abs() > 0.0 {
                branch.iter_mut().for_each(|h| *h /= s);
            }
        }
        Resampler {
            up,
            down,
            half_len,
            phases,
        }
    }

    pub fn ratio(&self) -> (usize, usize) {
        (self.up, self.down)
    }

    pub fn output_len(&self, n_in: usize) -> usize {
        (n_in * self.up + self.down / 2) / self.down
    }

    /// Resample with the filter's group delay removed, so output sample `m`
    /// aligns with input time `m * down / up`.
    pub fn process(&self, input: &[f64]) -> Vec<f64> {
        let n_out = self.output_len(input.len());
        let up = self.up as i64;
        let n_in = input.len() as i64;
        (0..n_out)
            .map(|m| {
                // position in the upsampled stream, delay-compensated
                let t = (m * self.down + self.half_len) as i64;
                let phase = (t % up) as usize;
                let branch = &self.phases[phase];
                // tap index k = phase + j*up touches input sample (t - k)/up
                let base = (t - phase as i64) / up;
                let mut acc = 0.0;
                for (j, &h) in branch.iter().enumerate() {
                    let idx = base - j as i64;
                    if idx < 0 {
                        break;
                    }
                    if idx < n_in {
                        acc += h * input[idx as usize];
                    }
                }
                acc
            })
            .collect()
    }
}

/// Resample `signal` from `fs_in` to `fs_out`.
pub fn resample(signal: &[f64], fs_in: f64, fs_out: f64) -> Result<Vec<f64>> {
    Ok(Resampler::new(fs_in, fs_out)?.process(signal))
}
