//! Tensor and label files, the dataset manifest, and synthetic datasets.

mod manifest;
pub mod mmtb;
pub mod png;
pub mod synthetic;

use std::fs;
use std::path::Path;

pub use manifest::{Manifest, Sample, MANIFEST_VERSION};
pub use synthetic::{generate_synthetic, SyntheticConfig, TensorFormat};

use crate::error::{Error, Result};
use crate::metrics::LabelMap;
use crate::tensor::{TensorBuffer, TensorData};

/// Reads a PNG or MMTB tensor, detected from the file's magic bytes.
pub fn read_tensor(path: &Path) -> Result<TensorBuffer> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    if bytes.starts_with(png::SIGNATURE) {
        png::decode(&bytes, path)
    } else {
        mmtb::decode(&bytes, path)
    }
}

/// Writes a tensor in the format named by the extension (`.png` or `.mmtb`).
pub fn write_tensor(t: &TensorBuffer, path: &Path) -> Result<()> {
    let bytes = match TensorFormat::from_path(path)? {
        TensorFormat::Png => png::encode(t, path)?,
        TensorFormat::Mmtb => mmtb::encode(t),
    };
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_label(path: &Path, ignore_index: u16) -> Result<LabelMap> {
    let t = read_tensor(path)?;
    if t.channels() != 1 {
        return Err(Error::format(
            path,
            format!("label maps have one channel, found {}", t.channels()),
        ));
    }
    let (h, w) = (t.height(), t.width());
    let data = match t.into_data() {
        TensorData::U8(v) => v.into_iter().map(u16::from).collect(),
        TensorData::U16(v) => v,
        TensorData::F32(_) => return Err(Error::format(path, "label maps must be integer")),
    };
    LabelMap::new(h, w, data, ignore_index)
}

/// Writes 8-bit labels when every id fits, 16-bit otherwise.
pub fn write_label(map: &LabelMap, path: &Path) -> Result<()> {
    let shape = [1, map.height(), map.width()];
    let data = if map.data().iter().all(|&v| v <= u8::MAX as u16) {
        TensorData::U8(map.data().iter().map(|&v| v as u8).collect())
    } else {
        TensorData::U16(map.data().to_vec())
    };
    write_tensor(&TensorBuffer::new(shape, data)?, path)
}
