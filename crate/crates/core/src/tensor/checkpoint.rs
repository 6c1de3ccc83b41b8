//! GCKP checkpoint files.
//!
//! Layout (little-endian):
//! - magic `b"GCKP"`, `u32` version (1), `u32` tensor count
//! - per tensor: `u32` name length, UTF-8 name, `u32` ndim, `ndim * u64` dims,
//!   `f32` payload of `product(dims)` values
//! - `u64` metadata length followed by a UTF-8 JSON blob

use crate::binio::{put_f32s, put_u32, put_u64, ByteReader};
use crate::error::{Error, Result};
use std::collections::HashSet;
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

const MAX_NDIM: u32 = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: Vec<u64>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, dims: Vec<u64>, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        let expected = element_count(&dims)
            .ok_or_else(|| Error::InvalidArgument(format!("dims of {name} overflow")))?;
        if expected != data.len() as u64 {
            return Err(Error::shape(
                "NamedTensor::new",
                format!("{expected} values for {name}"),
                data.len(),
            ));
        }
        Ok(Self { name, dims, data })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<NamedTensor>,
    pub metadata: serde_json::Value,
}

fn element_count(dims: &[u64]) -> Option<u64> {
    dims.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d))
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut seen = HashSet::new();
        for t in &self.tensors {
            if !seen.insert(t.name.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate tensor name {}",
                    t.name
                )));
            }
        }
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut out, CHECKPOINT_VERSION);
        put_u32(&mut out, self.tensors.len() as u32);
        for t in &self.tensors {
            put_u32(&mut out, t.name.len() as u32);
            out.extend_from_slice(t.name.as_bytes());
            put_u32(&mut out, t.dims.len() as u32);
            for &d in &t.dims {
                put_u64(&mut out, d);
            }
            put_f32s(&mut out, &t.data);
        }
        let meta = serde_json::to_vec(&self.metadata)?;
        put_u64(&mut out, meta.len() as u64);
        out.extend_from_slice(&meta);
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(buf);
        if r.bytes(4, "magic")? != CHECKPOINT_MAGIC {
            return Err(Error::format(0, "bad magic, expected GCKP"));
        }
        let version = r.u32("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::format(4, format!("unsupported version {version}")));
        }
        let count = r.u32("tensor count")?;
        let mut tensors = Vec::new();
        let mut seen = HashSet::new();
        for _ in 0..count {
            let at = r.offset();
            let name_len = r.u32("name length")? as usize;
            let name = std::str::from_utf8(r.bytes(name_len, "tensor name")?)
                .map_err(|_| Error::format(at, "tensor name is not UTF-8"))?
                .to_string();
            if !seen.insert(name.clone()) {
                return Err(Error::format(at, format!("duplicate tensor name {name}")));
            }
            let at = r.offset();
            let ndim = r.u32("ndim")?;
            if ndim > MAX_NDIM {
                return Err(Error::format(at, format!("ndim {ndim} exceeds {MAX_NDIM}")));
            }
            let dims = (0..ndim)
                .map(|_| r.u64("dim"))
                .collect::<Result<Vec<_>>>()?;
            let at = r.offset();
            let n = element_count(&dims)
                .filter(|&n| n <= (r.remaining() / 4) as u64)
                .ok_or_else(|| Error::format(at, format!("payload of {name} exceeds file size")))?;
            let data = r.f32s(n as usize, "tensor payload")?;
            tensors.push(NamedTensor { name, dims, data });
        }
        let at = r.offset();
        let meta_len = r.u64("metadata length")?;
        if meta_len > r.remaining() as u64 {
            return Err(Error::format(at, "metadata exceeds file size"));
        }
        let at = r.offset();
        let meta = r.bytes(meta_len as usize, "metadata")?;
        let metadata = serde_json::from_slice(meta)
            .map_err(|e| Error::format(at, format!("metadata is not valid JSON: {e}")))?;
        r.expect_end()?;
        Ok(Self { tensors, metadata })
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, checkpoint.to_bytes()?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}
