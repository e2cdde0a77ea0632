//! Versioned binary checkpoints.
//!
//! Layout, all little-endian: magic `MPIPNCKP`, format version (u32),
//! architecture widths (u32 count + u64 each), input normalization (6 f64),
//! implicit statistics (u32 width + means + standard deviations), then the
//! parameter tensors in declaration order (u32 count; per tensor u32 rank,
//! u64 dims, f64 data) and a trailing CRC-32 of everything before it.

use std::io::{Read, Write};
use std::path::Path;

use crate::autodiff::Tensor;

use super::implicit::ImplicitStats;
use super::model::{init_params, Architecture, InputNormalization, ModelParams};
use super::NetworkError;

const MAGIC: &[u8; 8] = b"MPIPNCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub fn encode_checkpoint(params: &ModelParams) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, CHECKPOINT_VERSION);
    let desc = params.arch.descriptor();
    put_u32(&mut buf, desc.len() as u32);
    desc.iter().for_each(|&d| put_u64(&mut buf, d));
    for v in params.input.center.iter().chain(&params.input.scale) {
        put_f64(&mut buf, *v);
    }
    put_u32(&mut buf, params.implicit.width() as u32);
    for v in params.implicit.mean.iter().chain(&params.implicit.std) {
        put_f64(&mut buf, *v);
    }
    let tensors = params.tensors();
    put_u32(&mut buf, tensors.len() as u32);
    for t in tensors {
        put_u32(&mut buf, t.shape().len() as u32);
        t.shape().iter().for_each(|&d| put_u64(&mut buf, d as u64));
        t.data().iter().for_each(|&v| put_f64(&mut buf, v));
    }
    let crc = crc32fast::hash(&buf);
    put_u32(&mut buf, crc);
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NetworkError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(NetworkError::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NetworkError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, NetworkError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, NetworkError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, NetworkError> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelParams, NetworkError> {
    if bytes.len() < MAGIC.len() + 8 {
        return Err(NetworkError::Checkpoint("truncated file".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(NetworkError::Checkpoint("checksum mismatch".into()));
    }
    let mut c = Cursor { bytes: body, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(NetworkError::Checkpoint("bad magic bytes".into()));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(NetworkError::Checkpoint(format!("unsupported version {version}")));
    }
    let n_desc = c.u32()? as usize;
    let desc: Vec<u64> = (0..n_desc).map(|_| c.u64()).collect::<Result<_, _>>()?;
    let arch = Architecture {
        output_channels: desc.last().copied().unwrap_or(0) as usize,
    };
    if arch.descriptor() != desc {
        return Err(NetworkError::Checkpoint(format!("unknown architecture {desc:?}")));
    }
    let v = c.f64s(6)?;
    let input = InputNormalization {
        center: [v[0], v[1], v[2]],
        scale: [v[3], v[4], v[5]],
    };
    let width = c.u32()? as usize;
    let implicit = ImplicitStats {
        mean: c.f64s(width)?,
        std: c.f64s(width)?,
    };
    let mut params = init_params(0, arch, input, implicit)?;
    let count = c.u32()? as usize;
    let expected = params.tensors().len();
    if count != expected {
        return Err(NetworkError::Checkpoint(format!(
            "expected {expected} tensors, found {count}"
        )));
    }
    let mut loaded = Vec::with_capacity(count);
    for _ in 0..count {
        let rank = c.u32()? as usize;
        let shape: Vec<usize> = (0..rank)
            .map(|_| c.u64().map(|d| d as usize))
            .collect::<Result<_, _>>()?;
        let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let len = len.ok_or(NetworkError::Checkpoint("tensor too large".into()))?;
        if len > body.len() / 8 {
            return Err(NetworkError::Checkpoint("truncated file".into()));
        }
        loaded.push(Tensor::new(shape, c.f64s(len)?)?);
    }
    if c.pos != body.len() {
        return Err(NetworkError::Checkpoint("trailing bytes".into()));
    }
    let mut mismatch = None;
    params.for_each_tensor_mut(|i, t| {
        if t.shape() != loaded[i].shape() && mismatch.is_none() {
            mismatch = Some(i);
        }
        *t = loaded[i].clone();
    });
    if let Some(i) = mismatch {
        return Err(NetworkError::Checkpoint(format!("tensor {i} has the wrong shape")));
    }
    Ok(params)
}

pub fn write_checkpoint<W: Write>(params: &ModelParams, mut w: W) -> Result<(), NetworkError> {
    w.write_all(&encode_checkpoint(params))?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ModelParams, NetworkError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_checkpoint(&bytes)
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<(), NetworkError> {
    std::fs::write(path, encode_checkpoint(params))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams, NetworkError> {
    decode_checkpoint(&std::fs::read(path)?)
}
