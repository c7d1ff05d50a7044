//! Flat binary weight bundles.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   b"MMFW"
//! version u32          (currently 1)
//! count   u32          number of tensors
//! count x {
//!     name_len u16, name bytes (UTF-8)
//!     rank     u8,  dims u32 x rank
//!     payload  f32 x prod(dims), row-major
//! }
//! ```

use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MMFW";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, dims: Vec<u32>, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        let n: usize = dims.iter().map(|d| *d as usize).product();
        if n != data.len() {
            return Err(Error::Weights(format!(
                "tensor {name}: dims {dims:?} need {n} values, got {}",
                data.len()
            )));
        }
        if name.len() > usize::from(u16::MAX) || dims.len() > usize::from(u8::MAX) {
            return Err(Error::Weights(format!("tensor {name}: name or rank too long")));
        }
        Ok(Tensor { name, dims, data })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightBundle {
    pub tensors: Vec<Tensor>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| Error::Weights(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

impl WeightBundle {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn push(&mut self, tensor: Tensor) {
        self.tensors.push(tensor);
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor { bytes, pos: 0 };
        if c.take(4).ok() != Some(MAGIC.as_slice()) {
            return Err(Error::Weights("bad magic".into()));
        }
        let version = c.u32()?;
        if version != VERSION {
            return Err(Error::Weights(format!("unsupported version {version}")));
        }
        let count = c.u32()?;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let len = c.u16()?;
            let name = std::str::from_utf8(c.take(usize::from(len))?)
                .map_err(|_| Error::Weights("tensor name is not UTF-8".into()))?
                .to_owned();
            let rank = c.u8()?;
            let dims = (0..rank).map(|_| c.u32()).collect::<Result<Vec<_>>>()?;
            let n = dims
                .iter()
                .try_fold(1usize, |acc, d| acc.checked_mul(*d as usize))
                .ok_or_else(|| Error::Weights(format!("tensor {name}: size overflow")))?;
            let payload = c.take(
                n.checked_mul(4)
                    .ok_or_else(|| Error::Weights(format!("tensor {name}: size overflow")))?,
            )?;
            let data = payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            tensors.push(Tensor { name, dims, data });
        }
        if c.pos != bytes.len() {
            return Err(Error::Weights(format!(
                "{} trailing bytes",
                bytes.len() - c.pos
            )));
        }
        Ok(WeightBundle { tensors })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.dims.len() as u8);
            for d in &t.dims {
                out.extend_from_slice(&d.to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}
