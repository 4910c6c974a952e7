//! Corruption scenarios: which modalities are damaged and under which regime.

use serde::{Deserialize, Serialize};

use crate::error::{check_fraction, Error, Result};
use crate::modality::{ModalitySet, ModalitySubset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Emm,
    Rmm,
    Nm,
}

/// Noise parameters in normalized-value units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    pub density: f64,
    pub sigma: f64,
    #[serde(default)]
    pub mu: f64,
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        check_fraction("density", self.density)?;
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Parameter {
                name: "sigma",
                value: self.sigma,
                reason: "must be a finite value >= 0",
            });
        }
        if !self.mu.is_finite() {
            return Err(Error::Parameter {
                name: "mu",
                value: self.mu,
                reason: "must be finite",
            });
        }
        Ok(())
    }
}

/// A named noise severity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseLevel {
    pub name: String,
    pub density: f64,
    pub sigma: f64,
    #[serde(default)]
    pub mu: f64,
}

impl NoiseLevel {
    pub fn new(name: &str, density: f64, sigma: f64, mu: f64) -> Self {
        Self {
            name: name.to_string(),
            density,
            sigma,
            mu,
        }
    }

    pub fn low() -> Self {
        Self::new("low", 0.05, 0.1, 0.0)
    }

    pub fn mid() -> Self {
        Self::new("mid", 0.1, 0.2, 0.0)
    }

    pub fn high() -> Self {
        Self::new("high", 0.2, 0.5, 0.0)
    }

    /// The three evaluation levels, most severe first.
    pub fn defaults() -> Vec<Self> {
        vec![Self::high(), Self::mid(), Self::low()]
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "low" => Some(Self::low()),
            "mid" | "middle" => Some(Self::mid()),
            "high" => Some(Self::high()),
            _ => None,
        }
    }

    pub fn params(&self) -> NoiseParams {
        NoiseParams {
            density: self.density,
            sigma: self.sigma,
            mu: self.mu,
        }
    }
}

/// Regime with its kind-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Regime {
    Emm,
    Rmm { r: f64 },
    Nm { level: String, noise: NoiseParams },
}

impl Regime {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            Regime::Emm => ScenarioKind::Emm,
            Regime::Rmm { .. } => ScenarioKind::Rmm,
            Regime::Nm { .. } => ScenarioKind::Nm,
        }
    }
}

/// One corruption scenario. For EMM/RMM `corrupted` is the damaged subset and
/// never covers every modality; for NM it lists the modalities that receive noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub id: String,
    pub corrupted: ModalitySubset,
    pub regime: Regime,
}

impl ScenarioSpec {
    pub fn emm(set: &ModalitySet, corrupted: ModalitySubset) -> Result<Self> {
        let id = format!("emm-{}", drop_suffix(set, corrupted));
        Self::checked(set, id, corrupted, Regime::Emm)
    }

    pub fn rmm(set: &ModalitySet, corrupted: ModalitySubset, r: f64) -> Result<Self> {
        check_fraction("r", r)?;
        let id = format!("rmm-r{r}-{}", drop_suffix(set, corrupted));
        Self::checked(set, id, corrupted, Regime::Rmm { r })
    }

    /// Noise on every modality.
    pub fn nm(set: &ModalitySet, level: &NoiseLevel) -> Result<Self> {
        Self::nm_on(set, level, set.full(), format!("nm-{}", level.name))
    }

    /// Noise restricted to `noisy`; the remaining modalities stay clean.
    pub fn nm_subset(set: &ModalitySet, level: &NoiseLevel, noisy: ModalitySubset) -> Result<Self> {
        let id = format!("nm-{}-{}", level.name, drop_suffix(set, noisy));
        if noisy.len() >= set.len() {
            return Err(Error::InvalidScenario {
                id,
                reason: "subset noise must leave at least one modality clean".into(),
            });
        }
        Self::nm_on(set, level, noisy, id)
    }

    fn nm_on(
        set: &ModalitySet,
        level: &NoiseLevel,
        noisy: ModalitySubset,
        id: String,
    ) -> Result<Self> {
        let noise = level.params();
        noise.validate()?;
        if level.name.is_empty() || level.name.contains(['/', '\\']) {
            return Err(Error::InvalidScenario {
                id,
                reason: "noise level needs a non-empty name without path separators".into(),
            });
        }
        check_members(set, &id, noisy)?;
        Ok(Self {
            id,
            corrupted: noisy,
            regime: Regime::Nm {
                level: level.name.clone(),
                noise,
            },
        })
    }

    fn checked(
        set: &ModalitySet,
        id: String,
        corrupted: ModalitySubset,
        regime: Regime,
    ) -> Result<Self> {
        check_members(set, &id, corrupted)?;
        if corrupted.len() >= set.len() {
            return Err(Error::InvalidScenario {
                id,
                reason: "at least one modality must stay intact".into(),
            });
        }
        Ok(Self {
            id,
            corrupted,
            regime,
        })
    }

    pub fn kind(&self) -> ScenarioKind {
        self.regime.kind()
    }

    pub fn is_clean(&self) -> bool {
        self.corrupted.is_empty()
    }
}

fn drop_suffix(set: &ModalitySet, corrupted: ModalitySubset) -> String {
    if corrupted.is_empty() {
        "clean".to_string()
    } else {
        format!("drop-{}", set.letters(corrupted))
    }
}

fn check_members(set: &ModalitySet, id: &str, subset: ModalitySubset) -> Result<()> {
    if subset.positions().any(|p| p >= set.len()) {
        return Err(Error::InvalidScenario {
            id: id.to_string(),
            reason: "subset references a modality outside the dataset".into(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_ids() {
        let set = ModalitySet::deliver();
        let el = set.subset(&["E", "L"]).unwrap();
        assert_eq!(ScenarioSpec::emm(&set, el).unwrap().id, "emm-drop-EL");
        assert_eq!(
            ScenarioSpec::emm(&set, ModalitySubset::EMPTY).unwrap().id,
            "emm-clean"
        );
        assert_eq!(
            ScenarioSpec::rmm(&set, set.subset(&["R"]).unwrap(), 0.75).unwrap().id,
            "rmm-r0.75-drop-R"
        );
        assert_eq!(ScenarioSpec::nm(&set, &NoiseLevel::high()).unwrap().id, "nm-high");
    }

    #[test]
    fn rejects_total_failure() {
        let set = ModalitySet::deliver();
        assert!(ScenarioSpec::emm(&set, set.full()).is_err());
        assert!(ScenarioSpec::rmm(&set, set.full(), 0.5).is_err());
        assert!(ScenarioSpec::nm_subset(&set, &NoiseLevel::low(), set.full()).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        let set = ModalitySet::deliver();
        assert!(ScenarioSpec::rmm(&set, ModalitySubset::EMPTY, 1.5).is_err());
        assert!(ScenarioSpec::nm(&set, &NoiseLevel::new("x", 0.1, -0.1, 0.0)).is_err());
        assert!(ScenarioSpec::nm(&set, &NoiseLevel::new("x", 1.1, 0.1, 0.0)).is_err());
    }

    #[test]
    fn presets() {
        let high = NoiseLevel::preset("high").unwrap();
        assert_eq!((high.density, high.sigma, high.mu), (0.2, 0.5, 0.0));
        let mid = NoiseLevel::preset("mid").unwrap();
        assert_eq!((mid.density, mid.sigma), (0.1, 0.2));
        let low = NoiseLevel::preset("low").unwrap();
        assert_eq!((low.density, low.sigma), (0.05, 0.1));
        assert!(NoiseLevel::preset("extreme").is_none());
    }
}
