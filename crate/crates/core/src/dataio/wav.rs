//! Minimal multitrack RIFF/WAVE codec.
//!
//! Supports integer PCM at 16 or 24 bits and IEEE float at 32 bits, in both
//! the plain and `WAVE_FORMAT_EXTENSIBLE` layouts. The standard `fmt ` chunk
//! only stores an integer sample rate, so the writer adds a private `frat`
//! chunk holding the exact rate as an `f64`; readers that do not know the
//! chunk skip it and see the rounded integer rate.

use std::path::Path;

use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Sample encoding of a stored track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SampleEncoding {
    Int16,
    Int24,
    Float32,
}

impl SampleEncoding {
    pub fn bit_depth(self) -> u16 {
        match self {
            SampleEncoding::Int16 => 16,
            SampleEncoding::Int24 => 24,
            SampleEncoding::Float32 => 32,
        }
    }

    fn bytes(self) -> usize {
        self.bit_depth() as usize / 8
    }

    fn full_scale(self) -> f64 {
        match self {
            SampleEncoding::Int16 => 32768.0,
            SampleEncoding::Int24 => 8_388_608.0,
            SampleEncoding::Float32 => 1.0,
        }
    }
}

/// Decoded waveform: channel-major samples in [-1, 1].
#[derive(Debug, Clone)]
pub struct WavData {
    pub channels: Vec<Vec<f64>>,
    pub fs_hz: f64,
    pub encoding: SampleEncoding,
}

fn unreadable(path: &Path, reason: impl Into<String>) -> Error {
    Error::UnreadableFile {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn read_wav(path: &Path) -> Result<WavData> {
    let bytes = std::fs::read(path).map_err(|e| unreadable(path, e.to_string()))?;
    decode_wav(&bytes).map_err(|e| match e {
        Error::Malformed(reason) => unreadable(path, reason),
        Error::ZeroChannels(_) => Error::ZeroChannels(path.to_path_buf()),
        other => other,
    })
}

pub fn decode_wav(bytes: &[u8]) -> Result<WavData> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Malformed("missing RIFF/WAVE header".into()));
    }
    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut exact_rate: Option<f64> = None;
    let mut data: Option<&[u8]> = None;

    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Malformed("truncated chunk".into()))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::Malformed("short fmt chunk".into()));
                }
                let mut tag = u16_at(body, 0);
                let channels = u16_at(body, 2);
                let rate = u32_at(body, 4);
                let bits = u16_at(body, 14);
                if tag == FORMAT_EXTENSIBLE {
                    if body.len() < 26 {
                        return Err(Error::Malformed("short extensible fmt chunk".into()));
                    }
                    // first two bytes of the sub-format GUID carry the real tag
                    tag = u16_at(body, 24);
                }
                fmt = Some((tag, channels, rate, bits));
            }
            b"frat" if body.len() >= 8 => {
                let mut raw = [0u8; 8];
                raw.copy_from_slice(&body[..8]);
                exact_rate = Some(f64::from_le_bytes(raw));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are padded to even length
        pos = body_end + (size & 1);
    }

    let (tag, n_channels, rate, bits) =
        fmt.ok_or_else(|| Error::Malformed("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::Malformed("missing data chunk".into()))?;
    if n_channels == 0 {
        return Err(Error::ZeroChannels(Default::default()));
    }
    let encoding = match (tag, bits) {
        (FORMAT_PCM, 16) => SampleEncoding::Int16,
        (FORMAT_PCM, 24) => SampleEncoding::Int24,
        (FORMAT_FLOAT, 32) => SampleEncoding::Float32,
        (t, b) => {
            return Err(Error::UnsupportedEncoding(format!(
                "format tag {t} with {b} bits per sample"
            )))
        }
    };
    let fs_hz = exact_rate.unwrap_or(rate as f64);
    if !(fs_hz > 0.0) {
        return Err(Error::Malformed("non-positive sample rate".into()));
    }

    let n_ch = n_channels as usize;
    let frame = n_ch * encoding.bytes();
    let n_frames = data.len() / frame;
    let scale = encoding.full_scale();
    let mut channels = vec![Vec::with_capacity(n_frames); n_ch];
    for f in 0..n_frames {
        for (c, channel) in channels.iter_mut().enumerate() {
            let at = f * frame + c * encoding.bytes();
            let v = match encoding {
                SampleEncoding::Int16 => i16::from_le_bytes([data[at], data[at + 1]]) as f64,
                SampleEncoding::Int24 => {
                    // sign-extend through the high byte of an i32
                    (i32::from_le_bytes([0, data[at], data[at + 1], data[at + 2]]) >> 8) as f64
                }
                SampleEncoding::Float32 => f32::from_le_bytes([
                    data[at],
                    data[at + 1],
                    data[at + 2],
                    data[at + 3],
                ]) as f64,
            };
            channel.push(v / scale);
        }
    }
    Ok(WavData {
        channels,
        fs_hz,
        encoding,
    })
}

fn quantize(x: f64, encoding: SampleEncoding) -> i32 {
    let scale = encoding.full_scale();
    let max = (scale - 1.0) as i32;
    let min = -(scale as i32);
    ((x * scale).round() as i64).clamp(min as i64, max as i64) as i32
}

pub fn encode_wav(channels: &[Vec<f64>], fs_hz: f64, encoding: SampleEncoding) -> Result<Vec<u8>> {
    if channels.is_empty() {
        return Err(Error::Empty("channels"));
    }
    let n_frames = channels[0].len();
    if channels.iter().any(|c| c.len() != n_frames) {
        return Err(Error::InvalidParameter("channels differ in length".into()));
    }
    let n_ch = channels.len();
    let bps = encoding.bytes();
    let data_len = n_frames * n_ch * bps;
    let tag = match encoding {
        SampleEncoding::Float32 => FORMAT_FLOAT,
        _ => FORMAT_PCM,
    };

    let mut out = Vec::with_capacity(data_len + 64);
    out.extend_from_slice(b"RIFF");
    let riff_size = 4 + (8 + 16) + (8 + 8) + (8 + data_len + (data_len & 1));
    out.extend_from_slice(&(riff_size as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");

    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&(n_ch as u16).to_le_bytes());
    out.extend_from_slice(&(fs_hz.round() as u32).to_le_bytes());
    let block_align = n_ch * bps;
    let byte_rate = (fs_hz.round() as usize) * block_align;
    out.extend_from_slice(&(byte_rate as u32).to_le_bytes());
    out.extend_from_slice(&(block_align as u16).to_le_bytes());
    out.extend_from_slice(&encoding.bit_depth().to_le_bytes());

    out.extend_from_slice(b"frat");
    out.extend_from_slice(&8u32.to_le_bytes());
    out.extend_from_slice(&fs_hz.to_le_bytes());

    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for f in 0..n_frames {
        for channel in channels {
            let x = channel[f];
            match encoding {
                SampleEncoding::Int16 => {
                    out.extend_from_slice(&(quantize(x, encoding) as i16).to_le_bytes())
                }
                SampleEncoding::Int24 => {
                    out.extend_from_slice(&quantize(x, encoding).to_le_bytes()[..3])
                }
                SampleEncoding::Float32 => out.extend_from_slice(&(x as f32).to_le_bytes()),
            }
        }
    }
    if data_len & 1 == 1 {
        out.push(0);
    }
    Ok(out)
}
