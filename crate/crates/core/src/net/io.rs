//! `TRPK` model container.
//!
//! ```text
//! header:  b"TRPK" | version u32 | rng_seed u64 | input c,h,w u32 x3 | layer count u32
//! layer:   tag u8, then
//!   0 conv2d   n,c,kh,kw u32 x4 | n*c*kh*kw f64 | n f64 bias
//!   1 relu
//!   2 avgpool2x2
//!   3 dense    outputs,inputs u32 x2 | outputs*inputs f64 | outputs f64 bias
//!   4 softmax cross-entropy
//! ```
//! All integers and floats little-endian.

use std::fs;
use std::path::Path;

use super::model::{Conv2d, Dense, Layer, NetworkModel};
use crate::error::{Error, Result};
use crate::reshape::WeightTensor4D;

pub const MAGIC: &[u8; 4] = b"TRPK";
pub const FORMAT_VERSION: u32 = 1;

const TAG_CONV: u8 = 0;
const TAG_RELU: u8 = 1;
const TAG_POOL: u8 = 2;
const TAG_DENSE: u8 = 3;
const TAG_LOSS: u8 = 4;

impl NetworkModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        out.extend_from_slice(&self.rng_seed.to_le_bytes());
        let (c, h, w) = self.input_shape;
        for d in [c, h, w, self.layers.len()] {
            put_u32(&mut out, d as u32);
        }
        for layer in &self.layers {
            match layer {
                Layer::Conv2d(conv) => {
                    out.push(TAG_CONV);
                    let (n, c, kh, kw) = conv.weight.dims();
                    for d in [n, c, kh, kw] {
                        put_u32(&mut out, d as u32);
                    }
                    put_f64s(&mut out, conv.weight.as_slice());
                    put_f64s(&mut out, &conv.bias);
                }
                Layer::Relu => out.push(TAG_RELU),
                Layer::AvgPool2x2 => out.push(TAG_POOL),
                Layer::Dense(d) => {
                    out.push(TAG_DENSE);
                    put_u32(&mut out, d.outputs as u32);
                    put_u32(&mut out, d.inputs as u32);
                    put_f64s(&mut out, &d.weight);
                    put_f64s(&mut out, &d.bias);
                }
                Layer::SoftmaxCrossEntropy => out.push(TAG_LOSS),
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("missing TRPK magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format version {version}")));
        }
        let seed = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        let input = (r.dim()?, r.dim()?, r.dim()?);
        let count = r.dim()?;
        let mut layers = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let layer = match r.take(1)?[0] {
                TAG_CONV => {
                    let dims = (r.dim()?, r.dim()?, r.dim()?, r.dim()?);
                    let weights = r.f64s(dims.0 * dims.1 * dims.2 * dims.3)?;
                    let bias = r.f64s(dims.0)?;
                    let weight = WeightTensor4D::new(dims, weights).map_err(corrupt)?;
                    Layer::Conv2d(Conv2d::new(weight, bias).map_err(corrupt)?)
                }
                TAG_RELU => Layer::Relu,
                TAG_POOL => Layer::AvgPool2x2,
                TAG_DENSE => {
                    let (outputs, inputs) = (r.dim()?, r.dim()?);
                    let weight = r.f64s(outputs * inputs)?;
                    let bias = r.f64s(outputs)?;
                    if weight.iter().chain(&bias).any(|x| !x.is_finite()) {
                        return Err(Error::Format("non-finite dense parameters".into()));
                    }
                    Layer::Dense(Dense::new(outputs, inputs, weight, bias).map_err(corrupt)?)
                }
                TAG_LOSS => Layer::SoftmaxCrossEntropy,
                tag => return Err(Error::Format(format!("unknown layer tag {tag}"))),
            };
            layers.push(layer);
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        NetworkModel::new(input, layers, seed).map_err(corrupt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes())
            .map_err(|e| Error::io(format!("writing model {}", path.display()), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes =
            fs::read(path).map_err(|e| Error::io(format!("reading model {}", path.display()), e))?;
        Self::from_bytes(&bytes)
    }
}

fn corrupt(e: Error) -> Error {
    Error::Format(e.to_string())
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn dim(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}
