//! Confusion-matrix accumulation and IoU.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_IGNORE_INDEX: u16 = 255;

/// Per-pixel class ids of one sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    data: Vec<u16>,
    ignore_index: u16,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, data: Vec<u16>, ignore_index: u16) -> Result<Self> {
        if height.checked_mul(width) != Some(data.len()) {
            return Err(Error::ShapeMismatch {
                expected: vec![height, width],
                found: vec![data.len()],
            });
        }
        Ok(Self {
            height,
            width,
            data,
            ignore_index,
        })
    }

    pub fn filled(height: usize, width: usize, class: u16, ignore_index: u16) -> Self {
        Self {
            height,
            width,
            data: vec![class; height * width],
            ignore_index,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u16] {
        &mut self.data
    }

    pub fn ignore_index(&self) -> u16 {
        self.ignore_index
    }

    pub fn with_ignore_index(mut self, ignore_index: u16) -> Self {
        self.ignore_index = ignore_index;
        self
    }

    /// Every element is a valid class id or the ignore index.
    pub fn validate(&self, classes: usize) -> Result<()> {
        match self
            .data
            .iter()
            .position(|&v| v != self.ignore_index && v as usize >= classes)
        {
            Some(index) => Err(Error::ClassOutOfRange {
                id: self.data[index],
                classes,
                index,
            }),
            None => Ok(()),
        }
    }
}

/// `counts[g * K + p]` = pixels with ground truth `g` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Self {
        let classes = rows.len();
        assert!(rows.iter().all(|r| r.len() == classes), "matrix must be square");
        Self {
            classes,
            counts: rows.concat(),
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.classes + pred]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        if self.classes == 0 {
            return Vec::new();
        }
        self.counts.chunks(self.classes).map(<[u64]>::to_vec).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds one prediction/ground-truth pair; ground-truth ignore pixels are skipped.
    pub fn accumulate(&mut self, pred: &LabelMap, gt: &LabelMap) -> Result<()> {
        if pred.shape() != gt.shape() {
            return Err(Error::ShapeMismatch {
                expected: vec![gt.height, gt.width],
                found: vec![pred.height, pred.width],
            });
        }
        let k = self.classes;
        for (index, (&g, &p)) in gt.data.iter().zip(&pred.data).enumerate() {
            if g == gt.ignore_index {
                continue;
            }
            if g as usize >= k {
                return Err(Error::ClassOutOfRange {
                    id: g,
                    classes: k,
                    index,
                });
            }
            if p == gt.ignore_index {
                return Err(Error::IgnoredPrediction { index });
            }
            if p as usize >= k {
                return Err(Error::ClassOutOfRange {
                    id: p,
                    classes: k,
                    index,
                });
            }
            self.counts[g as usize * k + p as usize] += 1;
        }
        Ok(())
    }

    pub fn merge(&self, other: &ConfusionMatrix) -> Result<ConfusionMatrix> {
        if self.classes != other.classes {
            return Err(Error::ClassCountMismatch(self.classes, other.classes));
        }
        Ok(ConfusionMatrix {
            classes: self.classes,
            counts: self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn class_iou(&self) -> ClassIou {
        class_iou(self)
    }

    pub fn mean_iou(&self) -> Result<f64> {
        mean_iou(self)
    }
}

pub fn accumulate_confusion(pred: &LabelMap, gt: &LabelMap, classes: usize) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::zeros(classes);
    cm.accumulate(pred, gt)?;
    Ok(cm)
}

pub fn merge_confusion(a: &ConfusionMatrix, b: &ConfusionMatrix) -> Result<ConfusionMatrix> {
    a.merge(b)
}

/// Per-class IoU; `None` marks a class with zero union.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassIou(pub Vec<Option<f64>>);

impl ClassIou {
    pub fn defined(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().flatten().copied()
    }
}

pub fn class_iou(cm: &ConfusionMatrix) -> ClassIou {
    let k = cm.classes;
    let ious = (0..k)
        .map(|c| {
            let tp = cm.get(c, c);
            let predicted: u64 = (0..k).map(|g| cm.get(g, c)).sum();
            let actual: u64 = (0..k).map(|p| cm.get(c, p)).sum();
            // TP + FP + FN
            let union = predicted + actual - tp;
            (union > 0).then(|| tp as f64 / union as f64)
        })
        .collect();
    ClassIou(ious)
}

/// Mean IoU in percent over classes with non-zero union.
pub fn mean_iou(cm: &ConfusionMatrix) -> Result<f64> {
    let ious = class_iou(cm);
    let (sum, n) = ious.defined().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        return Err(Error::EmptyEvaluation);
    }
    Ok(100.0 * sum / n as f64)
}
