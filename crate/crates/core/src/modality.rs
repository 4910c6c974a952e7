//! Modalities, modality subsets and the failure model shared by every other module.
//!
//! A dataset declares its modalities in a fixed order. That declaration order is
//! canonical: subsets iterate in it, combination labels are spelled in it, and
//! stream seeds are derived from names taken from it.

use serde::{Deserialize, Serialize};

use crate::error::{check_fraction, Error, Result};

/// Largest modality count for which subsets are enumerated (2^16 - 1 scenarios).
pub const MAX_MODALITIES: usize = 16;

/// Static description of one sensor channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalityProfile {
    pub name: String,
    pub letter: char,
    pub channels: u32,
    pub value_min: f64,
    pub value_max: f64,
    pub gaussian_eligible: bool,
    /// Event-type modalities carry asynchronous data and never receive Gaussian noise.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub event: bool,
}

impl ModalityProfile {
    pub fn new(
        name: &str,
        letter: char,
        channels: u32,
        value_min: f64,
        value_max: f64,
        gaussian_eligible: bool,
    ) -> Self {
        Self {
            name: name.to_string(),
            letter,
            channels,
            value_min,
            value_max,
            gaussian_eligible,
            event: false,
        }
    }

    pub fn event(name: &str, letter: char, channels: u32, value_min: f64, value_max: f64) -> Self {
        Self {
            event: true,
            ..Self::new(name, letter, channels, value_min, value_max, false)
        }
    }

    pub fn range(&self) -> f64 {
        self.value_max - self.value_min
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: &str| Error::InvalidProfile {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if self.name.is_empty() {
            return Err(invalid("name is empty"));
        }
        if !self.letter.is_ascii_uppercase() {
            return Err(invalid("letter must be a single uppercase ASCII character"));
        }
        if self.channels == 0 {
            return Err(invalid("channels must be positive"));
        }
        if !(self.value_min.is_finite() && self.value_max.is_finite())
            || self.value_min >= self.value_max
        {
            return Err(invalid("value_min must be below value_max"));
        }
        // missing data is written as zero, so zero has to be a valid reading
        if self.value_min > 0.0 || self.value_max < 0.0 {
            return Err(invalid("value range must contain 0"));
        }
        if self.event && self.gaussian_eligible {
            return Err(invalid("event modalities cannot be gaussian_eligible"));
        }
        Ok(())
    }
}

/// The four DELIVER modalities in their canonical order R, D, E, L.
pub fn deliver_profiles() -> Vec<ModalityProfile> {
    vec![
        ModalityProfile::new("rgb", 'R', 3, 0.0, 255.0, true),
        ModalityProfile::new("depth", 'D', 1, 0.0, 65535.0, true),
        ModalityProfile::event("event", 'E', 3, 0.0, 255.0),
        ModalityProfile::new("lidar", 'L', 3, 0.0, 255.0, true),
    ]
}

/// A subset of a dataset's modalities, stored as a bit mask over canonical positions.
///
/// Iteration always follows canonical order regardless of how the subset was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ModalitySubset(u32);

impl ModalitySubset {
    pub const EMPTY: ModalitySubset = ModalitySubset(0);

    pub fn full(n: usize) -> Self {
        debug_assert!(n <= MAX_MODALITIES);
        ModalitySubset(((1u64 << n) - 1) as u32)
    }

    pub fn from_positions<I: IntoIterator<Item = usize>>(positions: I) -> Self {
        let mut mask = 0u32;
        for p in positions {
            assert!(p < MAX_MODALITIES, "modality position {p} out of range");
            mask |= 1 << p;
        }
        ModalitySubset(mask)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, position: usize) -> bool {
        position < 32 && self.0 & (1 << position) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn complement(self, n: usize) -> Self {
        ModalitySubset(!self.0 & Self::full(n).0)
    }

    pub fn positions(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&p| self.0 & (1 << p) != 0)
    }

    /// Sort key: size first, then lexicographic over canonical positions.
    fn order_key(self) -> (usize, Vec<usize>) {
        (self.len(), self.positions().collect())
    }
}

/// Validated, ordered modality list of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalitySet {
    profiles: Vec<ModalityProfile>,
}

impl ModalitySet {
    pub fn new(profiles: Vec<ModalityProfile>) -> Result<Self> {
        check_count(profiles.len())?;
        for (i, p) in profiles.iter().enumerate() {
            p.validate()?;
            for q in &profiles[..i] {
                if q.name == p.name {
                    return Err(Error::InvalidProfile {
                        name: p.name.clone(),
                        reason: "duplicate modality name".into(),
                    });
                }
                if q.letter == p.letter {
                    return Err(Error::InvalidProfile {
                        name: p.name.clone(),
                        reason: format!("letter {} already used by `{}`", p.letter, q.name),
                    });
                }
            }
        }
        Ok(Self { profiles })
    }

    pub fn deliver() -> Self {
        Self::new(deliver_profiles()).expect("default profiles are valid")
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn profiles(&self) -> &[ModalityProfile] {
        &self.profiles
    }

    pub fn get(&self, position: usize) -> Option<&ModalityProfile> {
        self.profiles.get(position)
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.profiles
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| Error::UnknownModality(name.to_string()))
    }

    pub fn profile(&self, name: &str) -> Result<&ModalityProfile> {
        Ok(&self.profiles[self.position(name)?])
    }

    pub fn full(&self) -> ModalitySubset {
        ModalitySubset::full(self.len())
    }

    /// Builds a subset from modality names or letters in any order.
    pub fn subset<S: AsRef<str>>(&self, members: &[S]) -> Result<ModalitySubset> {
        let mut positions = Vec::with_capacity(members.len());
        for m in members {
            let m = m.as_ref();
            let pos = self
                .profiles
                .iter()
                .position(|p| p.name == m || (m.len() == 1 && m.starts_with(p.letter)))
                .ok_or_else(|| Error::UnknownModality(m.to_string()))?;
            if positions.contains(&pos) {
                return Err(Error::InvalidLabel {
                    label: m.to_string(),
                    reason: "modality listed twice".into(),
                });
            }
            positions.push(pos);
        }
        Ok(ModalitySubset::from_positions(positions))
    }

    pub fn names(&self, subset: ModalitySubset) -> Vec<&str> {
        subset
            .positions()
            .filter_map(|p| self.profiles.get(p))
            .map(|p| p.name.as_str())
            .collect()
    }

    /// Letters of `subset` in canonical order; empty string for the empty subset.
    pub fn letters(&self, subset: ModalitySubset) -> String {
        subset
            .positions()
            .filter_map(|p| self.profiles.get(p))
            .map(|p| p.letter)
            .collect()
    }

    /// Table column label for the modalities that remain intact.
    pub fn combination_label(&self, intact: ModalitySubset) -> Result<String> {
        if intact.is_empty() {
            return Err(Error::EmptyLabel);
        }
        Ok(self.letters(intact))
    }

    /// Label of the intact complement of a corrupted subset.
    pub fn label_for_corrupted(&self, corrupted: ModalitySubset) -> Result<String> {
        self.combination_label(corrupted.complement(self.len()))
    }

    /// Parses an intact-set label such as `"RD"`. Letters may appear in any order.
    pub fn parse_label(&self, label: &str) -> Result<ModalitySubset> {
        let bad = |reason: String| Error::InvalidLabel {
            label: label.to_string(),
            reason,
        };
        if label.is_empty() {
            return Err(bad("empty label".into()));
        }
        let mut mask = ModalitySubset::EMPTY;
        for c in label.chars() {
            let pos = self
                .profiles
                .iter()
                .position(|p| p.letter == c)
                .ok_or_else(|| bad(format!("unknown modality letter `{c}`")))?;
            if mask.contains(pos) {
                return Err(bad(format!("letter `{c}` repeated")));
            }
            mask = ModalitySubset(mask.0 | 1 << pos);
        }
        Ok(mask)
    }

    pub fn enumerate_corrupted_subsets(&self) -> Vec<ModalitySubset> {
        enumerate_corrupted_subsets(self.len()).expect("set size validated on construction")
    }

    /// Intact-set subsets in table order: R, D, E, L, RD, RE, ..., RDEL.
    pub fn table_order(&self) -> Vec<ModalitySubset> {
        let mut intact: Vec<_> = self
            .enumerate_corrupted_subsets()
            .into_iter()
            .map(|c| c.complement(self.len()))
            .collect();
        intact.sort_by_key(|s| s.order_key());
        intact
    }
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if n > MAX_MODALITIES {
        return Err(Error::CombinatorialLimit {
            n,
            limit: MAX_MODALITIES,
        });
    }
    Ok(())
}

/// All corrupted subsets of size 0..n-1 (2^n - 1 of them), ordered by size and then
/// lexicographically by canonical position. The clean (empty) subset comes first.
pub fn enumerate_corrupted_subsets(n: usize) -> Result<Vec<ModalitySubset>> {
    check_count(n)?;
    let mut out = Vec::with_capacity((1usize << n) - 1);
    for k in 0..n {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            out.push(ModalitySubset::from_positions(combo.iter().copied()));
            // next k-combination in lexicographic order
            let Some(i) = (0..k).rev().find(|&i| combo[i] < n - k + i) else {
                break;
            };
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
    Ok(out)
}

/// Independent per-modality damage probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureModel {
    p: f64,
}

impl FailureModel {
    pub fn new(p: f64) -> Result<Self> {
        check_fraction("p", p)?;
        Ok(Self { p })
    }

    pub fn p(self) -> f64 {
        self.p
    }
}
