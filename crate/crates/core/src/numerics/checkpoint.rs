//! Binary checkpoint format for [`ModelParams`].
//!
//! ```text
//! magic       4 bytes   "FMCK"
//! version     u32 LE    1
//! n_layers    u32 LE    L
//! dims        (L+1) x u32 LE   [input, hidden..., output]
//! payload     f64 LE    per layer: weight (dims[i] x dims[i+1], row-major), then bias (dims[i+1])
//! ```

use std::fs;
use std::path::Path;

use super::model::{Layer, ModelParams};
use super::tensor::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FMCK";
const VERSION: u32 = 1;

pub fn encode(params: &ModelParams) -> Vec<u8> {
    let dims = params.dims();
    let mut out = Vec::with_capacity(12 + 4 * dims.len() + 8 * params.flat().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.layers.len() as u32).to_le_bytes());
    for d in &dims {
        out.extend_from_slice(&(*d as u32).to_le_bytes());
    }
    for v in params.flat() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::format(field, "checkpoint is truncated")),
        }
    }

    fn u32(&mut self, field: &str) -> Result<u32> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize, field: &str) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| Error::format(field, "size overflow"))?;
        let b = self.take(len, field)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<ModelParams> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(Error::format("magic", "not a model checkpoint"));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(Error::format("version", format!("unsupported version {version}")));
    }
    let n_layers = cur.u32("n_layers")? as usize;
    if n_layers == 0 {
        return Err(Error::format("n_layers", "checkpoint has no layers"));
    }
    let dims = (0..=n_layers)
        .map(|_| cur.u32("dims").map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    if dims.contains(&0) {
        return Err(Error::format("dims", "zero-width layer"));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for w in dims.windows(2) {
        let weight = cur.f64s(w[0] * w[1], "weights")?;
        let bias = cur.f64s(w[1], "bias")?;
        layers.push(Layer {
            weight: Tensor::from_vec(w[0], w[1], weight)?,
            bias: Tensor::from_vec(1, w[1], bias)?,
        });
    }
    if cur.pos != bytes.len() {
        return Err(Error::format("payload", "trailing bytes after last layer"));
    }
    let params = ModelParams { layers };
    if !params.is_finite() {
        return Err(Error::Numeric("checkpoint holds non-finite weights".into()));
    }
    Ok(params)
}

pub fn save(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(params))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<ModelParams> {
    decode(&fs::read(path)?)
}
