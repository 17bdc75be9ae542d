//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! magic       8 bytes  "ECATCKPT"
//! version     u32
//! seed        u64
//! window      u32
//! signature   u32 length + UTF-8 bytes   (Parameterized::shape_signature)
//! blocks      u32 count, then per block:
//!               u32 length + UTF-8 name
//!               u32 ndim, ndim x u64 dims
//!               product(dims) x f64
//! ```
//!
//! Blocks appear in `params()` order. Loading checks the signature before
//! touching any parameter.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{EcatError, Result};
use crate::models::Parameterized;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ECATCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub window: u32,
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

pub fn encode_checkpoint(model: &dyn Parameterized, meta: CheckpointMeta) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&meta.seed.to_le_bytes());
    buf.extend_from_slice(&meta.window.to_le_bytes());
    put_str(&mut buf, &model.shape_signature());
    let params = model.params();
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params {
        put_str(&mut buf, &name);
        buf.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(EcatError::Checkpoint("truncated checkpoint".into()));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| EcatError::Checkpoint("invalid UTF-8".into()))
    }
}

/// Load values into `model`, which must already have the saved shapes.
pub fn decode_checkpoint(bytes: &[u8], model: &mut dyn Parameterized) -> Result<CheckpointMeta> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(8)? != CHECKPOINT_MAGIC {
        return Err(EcatError::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(EcatError::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let meta = CheckpointMeta { seed: c.u64()?, window: c.u32()? };
    let signature = c.string()?;
    let expected = model.shape_signature();
    if signature != expected {
        return Err(EcatError::Checkpoint(format!(
            "shape signature mismatch: file has {signature}, model has {expected}"
        )));
    }
    let count = c.u32()? as usize;
    let mut params = model.params_mut();
    if count != params.len() {
        return Err(EcatError::Checkpoint(format!("{count} blocks for {} parameters", params.len())));
    }
    let mut staged = Vec::with_capacity(count);
    for (name, t) in &params {
        let got = c.string()?;
        if &got != name {
            return Err(EcatError::Checkpoint(format!("expected block {name}, found {got}")));
        }
        let ndim = c.u32()? as usize;
        let dims = (0..ndim).map(|_| c.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if dims != t.shape() {
            return Err(EcatError::Checkpoint(format!("block {name} has shape {dims:?}, expected {:?}", t.shape())));
        }
        let data = (0..t.len()).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
        staged.push(data);
    }
    if c.pos != bytes.len() {
        return Err(EcatError::Checkpoint("trailing bytes after last block".into()));
    }
    for ((_, t), data) in params.iter_mut().zip(staged) {
        t.data_mut().copy_from_slice(&data);
    }
    Ok(meta)
}

pub fn save_checkpoint(path: &Path, model: &dyn Parameterized, meta: CheckpointMeta) -> Result<()> {
    let bytes = encode_checkpoint(model, meta);
    let mut f = std::fs::File::create(path).map_err(|e| EcatError::io(path, e))?;
    f.write_all(&bytes).map_err(|e| EcatError::io(path, e))
}

pub fn load_checkpoint(path: &Path, model: &mut dyn Parameterized) -> Result<CheckpointMeta> {
    let mut bytes = Vec::new();
    std::fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| EcatError::io(path, e))?;
    decode_checkpoint(&bytes, model)
}
