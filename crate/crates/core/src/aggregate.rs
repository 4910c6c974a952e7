//! Averaged and Bernoulli-weighted aggregation of per-combination mIoU.
//!
//! Each modality fails independently with probability `p`, so a specific corrupted
//! subset of size `k` out of `n` occurs with probability `p^k (1-p)^(n-k)`. The
//! total-failure subset is never evaluated, which leaves the remaining weights
//! summing to `1 - p^n`; expected values are divided by that mass.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_fraction, Error, Result};
use crate::metrics::{ClassIou, ConfusionMatrix};
use crate::modality::{ModalitySet, ModalitySubset};
use crate::scenario::{NoiseLevel, ScenarioKind};

/// Per-combination mIoU (percent) keyed by corrupted subset.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub kind: ScenarioKind,
    pub r: Option<f64>,
    modalities: ModalitySet,
    entries: BTreeMap<ModalitySubset, f64>,
}

impl MetricRecord {
    pub fn new(kind: ScenarioKind, r: Option<f64>, modalities: ModalitySet) -> Self {
        Self {
            kind,
            r,
            modalities,
            entries: BTreeMap::new(),
        }
    }

    /// Builds a record from intact-set labels such as `"RD"`.
    pub fn from_labels<'a, I>(
        kind: ScenarioKind,
        r: Option<f64>,
        modalities: &ModalitySet,
        values: I,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut record = Self::new(kind, r, modalities.clone());
        for (label, miou) in values {
            let intact = modalities.parse_label(label)?;
            let corrupted = intact.complement(modalities.len());
            if record.entries.contains_key(&corrupted) {
                return Err(Error::InvalidLabel {
                    label: label.to_string(),
                    reason: "combination listed twice".into(),
                });
            }
            record.insert(corrupted, miou)?;
        }
        Ok(record)
    }

    pub fn modalities(&self) -> &ModalitySet {
        &self.modalities
    }

    pub fn insert(&mut self, corrupted: ModalitySubset, miou: f64) -> Result<()> {
        if !(0.0..=100.0).contains(&miou) {
            return Err(Error::Parameter {
                name: "miou",
                value: miou,
                reason: "must lie in [0, 100]",
            });
        }
        if corrupted.len() >= self.modalities.len()
            || corrupted.positions().any(|p| p >= self.modalities.len())
        {
            return Err(Error::InvalidLabel {
                label: self.modalities.letters(corrupted),
                reason: "corrupted subset must leave a modality of the dataset intact".into(),
            });
        }
        self.entries.insert(corrupted, miou);
        Ok(())
    }

    pub fn get(&self, corrupted: ModalitySubset) -> Option<f64> {
        self.entries.get(&corrupted).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Intact-set labels of the combinations not yet recorded, in table order.
    pub fn missing_labels(&self) -> Vec<String> {
        let n = self.modalities.len();
        self.modalities
            .table_order()
            .into_iter()
            .filter(|intact| !self.entries.contains_key(&intact.complement(n)))
            .map(|intact| self.modalities.letters(intact))
            .collect()
    }

    pub fn check_complete(&self) -> Result<()> {
        let missing = self.missing_labels();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingCombinations(missing))
        }
    }

    /// `(corrupted, miou)` pairs in enumeration order.
    fn ordered(&self) -> Result<Vec<(ModalitySubset, f64)>> {
        self.check_complete()?;
        Ok(self
            .modalities
            .enumerate_corrupted_subsets()
            .into_iter()
            .map(|s| (s, self.entries[&s]))
            .collect())
    }
}

/// Probability of one specific corrupted subset of size `k` among `n` modalities.
pub fn subset_probability(k: usize, n: usize, p: f64) -> Result<f64> {
    check_fraction("p", p)?;
    if k > n {
        return Err(Error::Parameter {
            name: "k",
            value: k as f64,
            reason: "cannot exceed the modality count",
        });
    }
    Ok(p.powi(k as i32) * (1.0 - p).powi((n - k) as i32))
}

/// Clamps a convex combination of `entries` back into their range, absorbing
/// rounding so that a constant record yields exactly its constant.
fn within_entries(value: f64, entries: &[(ModalitySubset, f64)]) -> f64 {
    let lo = entries.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    let hi = entries.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    value.clamp(lo, hi)
}

pub fn avg_miou(record: &MetricRecord) -> Result<f64> {
    let entries = record.ordered()?;
    let mean = entries.iter().map(|(_, v)| v).sum::<f64>() / entries.len() as f64;
    Ok(within_entries(mean, &entries))
}

pub fn expected_miou(record: &MetricRecord, p: f64) -> Result<f64> {
    check_fraction("p", p)?;
    if p == 1.0 {
        return Err(Error::DegenerateNormalization);
    }
    let n = record.modalities.len();
    let entries = record.ordered()?;
    let mut sum = 0.0;
    for &(subset, miou) in &entries {
        sum += subset_probability(subset.len(), n, p)? * miou;
    }
    Ok(within_entries(sum / (1.0 - p.powi(n as i32)), &entries))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedValue {
    pub p: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationScore {
    /// Intact modalities, e.g. `"RD"`.
    pub label: String,
    /// Corrupted modalities; empty for the clean combination.
    pub corrupted: String,
    pub miou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSummary {
    pub avg: f64,
    pub expected: Vec<ExpectedValue>,
    pub combinations: Vec<CombinationScore>,
}

impl RegimeSummary {
    pub fn expected_at(&self, p: f64) -> Option<f64> {
        self.expected.iter().find(|e| e.p == p).map(|e| e.value)
    }

    pub fn combination(&self, label: &str) -> Option<f64> {
        self.combinations.iter().find(|c| c.label == label).map(|c| c.miou)
    }
}

/// Average, expected values and the table-ordered combinations of one record.
pub fn summarize(record: &MetricRecord, p_grid: &[f64]) -> Result<RegimeSummary> {
    let avg = avg_miou(record)?;
    let expected = p_grid
        .iter()
        .map(|&p| Ok(ExpectedValue { p, value: expected_miou(record, p)? }))
        .collect::<Result<_>>()?;
    let set = &record.modalities;
    let combinations = set
        .table_order()
        .into_iter()
        .map(|intact| {
            let corrupted = intact.complement(set.len());
            CombinationScore {
                label: set.letters(intact),
                corrupted: set.letters(corrupted),
                miou: record.entries[&corrupted],
            }
        })
        .collect();
    Ok(RegimeSummary {
        avg,
        expected,
        combinations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmmSummary {
    pub r: f64,
    #[serde(flatten)]
    pub summary: RegimeSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmSummary {
    pub level: String,
    pub density: f64,
    pub sigma: f64,
    pub mu: f64,
    pub miou: f64,
    pub class_iou: ClassIou,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmSubsetSummary {
    pub level: String,
    #[serde(flatten)]
    pub summary: RegimeSummary,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RobustnessReport {
    /// Modality letters in canonical order.
    pub modalities: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<String>,
    pub p_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emm: Option<RegimeSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rmm: Vec<RmmSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nm: Vec<NmSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nm_subsets: Vec<NmSubsetSummary>,
}

impl RobustnessReport {
    pub fn is_empty(&self) -> bool {
        self.emm.is_none() && self.rmm.is_empty() && self.nm.is_empty() && self.nm_subsets.is_empty()
    }

    /// Every reported percentage, for range checks.
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut push = |s: &RegimeSummary| {
            out.push(s.avg);
            out.extend(s.expected.iter().map(|e| e.value));
            out.extend(s.combinations.iter().map(|c| c.miou));
        };
        if let Some(e) = &self.emm {
            push(e);
        }
        self.rmm.iter().for_each(|r| push(&r.summary));
        self.nm_subsets.iter().for_each(|r| push(&r.summary));
        out.extend(self.nm.iter().map(|n| n.miou));
        out
    }
}

pub fn build_report(
    emm: Option<&MetricRecord>,
    rmm: &[MetricRecord],
    nm: &[(NoiseLevel, ConfusionMatrix)],
    p_grid: &[f64],
) -> Result<RobustnessReport> {
    if p_grid.is_empty() {
        return Err(Error::Config("p_grid must not be empty".into()));
    }
    let modalities = emm
        .or_else(|| rmm.first())
        .map(|r| {
            r.modalities
                .profiles()
                .iter()
                .map(|p| p.letter.to_string())
                .collect()
        })
        .unwrap_or_default();
    let rmm = rmm
        .iter()
        .map(|record| {
            let r = record.r.ok_or_else(|| Error::Config("RMM record without r".into()))?;
            Ok(RmmSummary {
                r,
                summary: summarize(record, p_grid)?,
            })
        })
        .collect::<Result<_>>()?;
    let nm = nm
        .iter()
        .map(|(level, cm)| {
            Ok(NmSummary {
                level: level.name.clone(),
                density: level.density,
                sigma: level.sigma,
                mu: level.mu,
                miou: cm.mean_iou()?,
                class_iou: cm.class_iou(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(RobustnessReport {
        modalities,
        classes: Vec::new(),
        p_grid: p_grid.to_vec(),
        emm: emm.map(|r| summarize(r, p_grid)).transpose()?,
        rmm,
        nm,
        nm_subsets: Vec::new(),
    })
}

/// Rounds half away from zero to two decimals, for display only.
pub fn round2(value: f64) -> f64 {
    let scaled = value * 100.0;
    // absorb representation error such as 37.905 stored as 37.904999...
    let nudged = scaled + scaled.signum() * 1e-9 * scaled.abs().max(1.0);
    nudged.round() / 100.0
}

pub fn format2(value: f64) -> String {
    format!("{:.2}", round2(value))
}
