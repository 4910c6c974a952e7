//! PNG tensors: 8-bit gray/RGB and 16-bit gray.

use std::io::Cursor;
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use crate::error::{Error, Result};
use crate::tensor::{TensorBuffer, TensorData};

pub const SIGNATURE: &[u8; 8] = b"\x89PNG\r\n\x1a\n";

pub fn decode(bytes: &[u8], path: &Path) -> Result<TensorBuffer> {
    let bad = |reason: String| Error::format(path, reason);
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| bad(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| bad("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| bad(e.to_string()))?;
    buf.truncate(info.buffer_size());
    let (h, w) = (info.height as usize, info.width as usize);
    let channels = match info.color_type {
        ColorType::Grayscale => 1,
        ColorType::Rgb => 3,
        other => return Err(bad(format!("unsupported PNG color type {other:?}"))),
    };
    let plane = h * w;
    let shape = [channels, h, w];
    match info.bit_depth {
        BitDepth::Eight => {
            let mut data = vec![0u8; buf.len()];
            for (i, px) in buf.chunks_exact(channels).enumerate() {
                for (c, &v) in px.iter().enumerate() {
                    data[c * plane + i] = v;
                }
            }
            TensorBuffer::new(shape, TensorData::U8(data))
        }
        BitDepth::Sixteen if channels == 1 => {
            let data = buf
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect();
            TensorBuffer::new(shape, TensorData::U16(data))
        }
        depth => Err(bad(format!(
            "unsupported PNG bit depth {depth:?} for {channels} channel(s)"
        ))),
    }
}

/// Encodes u8 gray/RGB or u16 gray. Other layouts need MMTB.
pub fn encode(t: &TensorBuffer, path: &Path) -> Result<Vec<u8>> {
    let (c, h, w) = (t.channels(), t.height(), t.width());
    let (color, depth, raw) = match (t.data(), c) {
        (TensorData::U8(v), 1) => (ColorType::Grayscale, BitDepth::Eight, v.clone()),
        (TensorData::U8(v), 3) => {
            let plane = h * w;
            let mut raw = vec![0u8; v.len()];
            for i in 0..plane {
                for ch in 0..3 {
                    raw[i * 3 + ch] = v[ch * plane + i];
                }
            }
            (ColorType::Rgb, BitDepth::Eight, raw)
        }
        (TensorData::U16(v), 1) => (
            ColorType::Grayscale,
            BitDepth::Sixteen,
            v.iter().flat_map(|x| x.to_be_bytes()).collect(),
        ),
        _ => {
            return Err(Error::format(
                path,
                format!(
                    "PNG holds u8 gray/RGB or u16 gray; got {:?} with {c} channel(s), use .mmtb",
                    t.dtype()
                ),
            ))
        }
    };
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
        enc.set_color(color);
        enc.set_depth(depth);
        enc.set_compression(png::Compression::Fast);
        let mut writer = enc.write_header().map_err(|e| Error::format(path, e.to_string()))?;
        writer
            .write_image_data(&raw)
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    Ok(out)
}
