//! Channel-major tensors holding one modality of one sample in native units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modality::ModalityProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    U8,
    U16,
    F32,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::U8 => 0,
            DType::U16 => 1,
            DType::F32 => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DType::U8),
            1 => Some(DType::U16),
            2 => Some(DType::F32),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::U16 => 2,
            DType::F32 => 4,
        }
    }

    /// Smallest dtype whose integer range covers `[min, max]`, f32 otherwise.
    pub fn for_range(min: f64, max: f64) -> Self {
        let integral = min.fract() == 0.0 && max.fract() == 0.0 && min >= 0.0;
        match max {
            m if integral && m <= u8::MAX as f64 => DType::U8,
            m if integral && m <= u16::MAX as f64 => DType::U16,
            _ => DType::F32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    U8(Vec<u8>),
    U16(Vec<u16>),
    F32(Vec<f32>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::U8(v) => v.len(),
            TensorData::U16(v) => v.len(),
            TensorData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            TensorData::U8(_) => DType::U8,
            TensorData::U16(_) => DType::U16,
            TensorData::F32(_) => DType::F32,
        }
    }

    pub fn get(&self, i: usize) -> f64 {
        match self {
            TensorData::U8(v) => v[i] as f64,
            TensorData::U16(v) => v[i] as f64,
            TensorData::F32(v) => v[i] as f64,
        }
    }

    /// Stores `value`, rounding to nearest (ties away from zero) and saturating
    /// for integer dtypes.
    pub fn set(&mut self, i: usize, value: f64) {
        match self {
            TensorData::U8(v) => v[i] = value.round() as u8,
            TensorData::U16(v) => v[i] = value.round() as u16,
            TensorData::F32(v) => v[i] = value as f32,
        }
    }

    pub fn zero(&mut self, i: usize) {
        match self {
            TensorData::U8(v) => v[i] = 0,
            TensorData::U16(v) => v[i] = 0,
            TensorData::F32(v) => v[i] = 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }
}

/// Shape is `(channels, height, width)`; data is row-major within each channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorBuffer {
    shape: [usize; 3],
    data: TensorData,
}

impl TensorBuffer {
    pub fn new(shape: [usize; 3], data: TensorData) -> Result<Self> {
        let expected = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::ShapeMismatch {
                expected: shape.to_vec(),
                found: vec![data.len()],
            })?;
        if expected != data.len() {
            return Err(Error::ShapeMismatch {
                expected: shape.to_vec(),
                found: vec![data.len()],
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(dtype: DType, shape: [usize; 3]) -> Self {
        let n = shape.iter().product();
        let data = match dtype {
            DType::U8 => TensorData::U8(vec![0; n]),
            DType::U16 => TensorData::U16(vec![0; n]),
            DType::F32 => TensorData::F32(vec![0.0; n]),
        };
        Self { shape, data }
    }

    /// Tensor filled with `value` (rounded for integer dtypes).
    pub fn filled(dtype: DType, shape: [usize; 3], value: f64) -> Self {
        let mut t = Self::zeros(dtype, shape);
        for i in 0..t.len() {
            t.data.set(i, value);
        }
        t
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn channels(&self) -> usize {
        self.shape[0]
    }

    pub fn height(&self) -> usize {
        self.shape[1]
    }

    pub fn width(&self) -> usize {
        self.shape[2]
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut TensorData {
        &mut self.data
    }

    pub fn into_data(self) -> TensorData {
        self.data
    }

    /// Checks every element against the profile's value range.
    pub fn check_range(&self, profile: &ModalityProfile) -> Result<()> {
        if let Some(value) = self
            .data
            .iter()
            .find(|v| !(*v >= profile.value_min && *v <= profile.value_max))
        {
            return Err(Error::OutOfRange {
                modality: profile.name.clone(),
                value,
                min: profile.value_min,
                max: profile.value_max,
            });
        }
        Ok(())
    }

    /// Number of positions whose values differ bit-wise.
    pub fn count_differences(&self, other: &TensorBuffer) -> usize {
        match (&self.data, &other.data) {
            (TensorData::U8(a), TensorData::U8(b)) => a.iter().zip(b).filter(|(x, y)| x != y).count(),
            (TensorData::U16(a), TensorData::U16(b)) => {
                a.iter().zip(b).filter(|(x, y)| x != y).count()
            }
            (TensorData::F32(a), TensorData::F32(b)) => a
                .iter()
                .zip(b)
                .filter(|(x, y)| x.to_bits() != y.to_bits())
                .count(),
            _ => self.len().max(other.len()),
        }
    }
}
