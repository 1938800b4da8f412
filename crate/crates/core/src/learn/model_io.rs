//! Binary container for trained SVM models.
//!
//! Layout (all integers and floats little-endian):
//!
//! | field            | type               |
//! |------------------|--------------------|
//! | magic            | `b"PCGSVM\0\0"`    |
//! | version          | u32 (currently 1)  |
//! | kernel kind      | u8 (0 rbf, 1 linear, 2 poly3, 3 sigmoid) |
//! | gamma present    | u8                 |
//! | gamma (spec)     | f64                |
//! | coef0            | f64                |
//! | C                | f64                |
//! | gamma (resolved) | f64                |
//! | bias             | f64                |
//! | n_features       | u32                |
//! | n_support        | u32                |
//! | scaler mean      | f64 x n_features   |
//! | scaler std       | f64 x n_features   |
//! | per SV: coef, x  | f64, f64 x n_features |

use std::io::{Read, Write};
use std::path::Path;

use super::kernel::{KernelKind, KernelSpec};
use super::svm::{Scaler, SvmModel};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"PCGSVM\0\0";
pub const MODEL_VERSION: u32 = 1;

fn kind_code(kind: KernelKind) -> u8 {
    match kind {
        KernelKind::Rbf => 0,
        KernelKind::Linear => 1,
        KernelKind::Poly3 => 2,
        KernelKind::Sigmoid => 3,
    }
}

pub fn encode_model(model: &SvmModel) -> Vec<u8> {
    let d = model.n_features();
    let mut out = Vec::with_capacity(64 + 8 * (2 * d + model.support_vectors.len() * (d + 1)));
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.push(kind_code(model.kernel.kind));
    out.push(model.kernel.gamma.is_some() as u8);
    for v in [
        model.kernel.gamma.unwrap_or(0.0),
        model.kernel.coef0,
        model.kernel.c,
        model.gamma,
        model.bias,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(model.support_vectors.len() as u32).to_le_bytes());
    for v in model.scaler.mean.iter().chain(&model.scaler.std) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for (sv, c) in model.support_vectors.iter().zip(&model.dual_coefs) {
        out.extend_from_slice(&c.to_le_bytes());
        for v in sv {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Malformed("truncated model file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<SvmModel> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if cur.take(8)? != MODEL_MAGIC {
        return Err(Error::Malformed("not a model file".into()));
    }
    let version = cur.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::Malformed(format!("unsupported model version {version}")));
    }
    let kind = match cur.u8()? {
        0 => KernelKind::Rbf,
        1 => KernelKind::Linear,
        2 => KernelKind::Poly3,
        3 => KernelKind::Sigmoid,
        k => return Err(Error::Malformed(format!("unknown kernel code {k}"))),
    };
    let has_gamma = cur.u8()? != 0;
    let spec_gamma = cur.f64()?;
    let coef0 = cur.f64()?;
    let c = cur.f64()?;
    let gamma = cur.f64()?;
    let bias = cur.f64()?;
    let d = cur.u32()? as usize;
    let n_sv = cur.u32()? as usize;
    let mean = cur.f64s(d)?;
    let std = cur.f64s(d)?;
    let mut support_vectors = Vec::with_capacity(n_sv);
    let mut dual_coefs = Vec::with_capacity(n_sv);
    for _ in 0..n_sv {
        dual_coefs.push(cur.f64()?);
        support_vectors.push(cur.f64s(d)?);
    }
    if cur.pos != bytes.len() {
        return Err(Error::Malformed("trailing bytes in model file".into()));
    }
    Ok(SvmModel {
        kernel: KernelSpec {
            kind,
            gamma: has_gamma.then_some(spec_gamma),
            coef0,
            c,
        },
        gamma,
        support_vectors,
        dual_coefs,
        bias,
        scaler: Scaler { mean, std },
    })
}

pub fn save_model(path: impl AsRef<Path>, model: &SvmModel) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_model(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SvmModel> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    decode_model(&buf)
}
