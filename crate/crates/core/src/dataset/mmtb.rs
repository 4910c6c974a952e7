//! MMTB raw tensor container.
//!
//! Layout: `"MMTB"`, version byte `0x01`, dtype byte (0 = u8, 1 = u16, 2 = f32),
//! ndim byte, `ndim` little-endian u32 dimensions, then the row-major
//! little-endian payload.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{DType, TensorBuffer, TensorData};

pub const MAGIC: &[u8; 4] = b"MMTB";
pub const VERSION: u8 = 1;

pub fn encode(t: &TensorBuffer) -> Vec<u8> {
    let shape = t.shape();
    let mut out = Vec::with_capacity(7 + 12 + t.len() * t.dtype().size());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(t.dtype().code());
    out.push(shape.len() as u8);
    for d in shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    match t.data() {
        TensorData::U8(v) => out.extend_from_slice(v),
        TensorData::U16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    out
}

/// Decodes an MMTB buffer. Two-dimensional tensors become single-channel.
pub fn decode(bytes: &[u8], path: &Path) -> Result<TensorBuffer> {
    let bad = |reason: String| Error::format(path, reason);
    if bytes.len() < 7 || &bytes[..4] != MAGIC {
        return Err(bad("bad magic, expected MMTB".into()));
    }
    if bytes[4] != VERSION {
        return Err(bad(format!("unsupported MMTB version {}", bytes[4])));
    }
    let dtype = DType::from_code(bytes[5]).ok_or_else(|| bad(format!("unsupported dtype {}", bytes[5])))?;
    let ndim = bytes[6] as usize;
    let header = 7 + 4 * ndim;
    if bytes.len() < header {
        return Err(bad("truncated header".into()));
    }
    let dims: Vec<usize> = bytes[7..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let shape = match dims.as_slice() {
        [h, w] => [1, *h, *w],
        [c, h, w] => [*c, *h, *w],
        _ => return Err(bad(format!("expected 2 or 3 dimensions, found {ndim}"))),
    };
    let count = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(dtype.size()).map(|b| (n, b)));
    let (n, payload_len) = count.ok_or_else(|| bad("dimension overflow".into()))?;
    let payload = &bytes[header..];
    if payload.len() < payload_len {
        return Err(bad(format!(
            "truncated payload: {} of {payload_len} bytes",
            payload.len()
        )));
    }
    if payload.len() > payload_len {
        return Err(bad("trailing bytes after payload".into()));
    }
    let data = match dtype {
        DType::U8 => TensorData::U8(payload.to_vec()),
        DType::U16 => TensorData::U16(
            payload
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect(),
        ),
        DType::F32 => TensorData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
    };
    debug_assert_eq!(data.len(), n);
    TensorBuffer::new(shape, data)
}
