use std::collections::HashSet;
use std::fs;
use std::path::{Component, Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::DEFAULT_IGNORE_INDEX;
use crate::modality::{ModalityProfile, ModalitySet};

pub const MANIFEST_VERSION: u32 = 1;

fn default_ignore_index() -> u16 {
    DEFAULT_IGNORE_INDEX
}

/// One sample: an input file per modality plus an optional label map.
///
/// Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub id: String,
    pub inputs: IndexMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// Dataset index. Modality order in `modalities` is the canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub modalities: Vec<ModalityProfile>,
    pub classes: Vec<String>,
    #[serde(default = "default_ignore_index")]
    pub ignore_index: u16,
    pub samples: Vec<Sample>,
    #[serde(skip)]
    root: PathBuf,
}

impl Manifest {
    pub fn new(
        modalities: Vec<ModalityProfile>,
        classes: Vec<String>,
        ignore_index: u16,
        samples: Vec<Sample>,
        root: impl Into<PathBuf>,
    ) -> Self {
        Self {
            version: MANIFEST_VERSION,
            modalities,
            classes,
            ignore_index,
            samples,
            root: root.into(),
        }
    }

    /// Parses and validates `path`. With `strict`, every referenced file must exist.
    pub fn load(path: &Path, strict: bool) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading manifest {}", path.display()), e))?;
        let mut m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate().map_err(|e| match e {
            Error::Manifest { reason, .. } => Error::Manifest {
                path: path.to_path_buf(),
                reason,
            },
            other => Error::Manifest {
                path: path.to_path_buf(),
                reason: other.to_string(),
            },
        })?;
        if strict {
            m.check_files()?;
        }
        Ok(m)
    }

    /// Writes pretty-printed JSON and rebases the manifest onto `path`'s directory.
    pub fn save(&mut self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            context: format!("serializing manifest {}", path.display()),
            source: e,
        })?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        self.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn set_root(&mut self, root: impl Into<PathBuf>) {
        self.root = root.into();
    }

    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.root.join(relative)
    }

    pub fn modality_set(&self) -> Result<ModalitySet> {
        ModalitySet::new(self.modalities.clone())
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Copy without label paths, as handed to external predictors.
    pub fn without_labels(&self) -> Manifest {
        let mut m = self.clone();
        m.samples.iter_mut().for_each(|s| s.label = None);
        m
    }

    pub fn validate(&self) -> Result<()> {
        let err = |reason: String| Error::Manifest {
            path: self.root.clone(),
            reason,
        };
        if self.version != MANIFEST_VERSION {
            return Err(err(format!(
                "unsupported version {} (expected {MANIFEST_VERSION})",
                self.version
            )));
        }
        let set = self.modality_set().map_err(|e| err(format!("modalities: {e}")))?;
        if self.classes.len() < 2 {
            return Err(err(format!("classes: need at least 2, found {}", self.classes.len())));
        }
        if (self.ignore_index as usize) < self.classes.len() {
            return Err(err(format!(
                "ignore_index {} collides with a class id",
                self.ignore_index
            )));
        }
        let mut seen = HashSet::new();
        for (i, s) in self.samples.iter().enumerate() {
            let at = format!("samples[{i}] (id `{}`)", s.id);
            if s.id.is_empty() || s.id.contains(['/', '\\']) || s.id == "." || s.id == ".." {
                return Err(err(format!("{at}: id must be a non-empty file name")));
            }
            if !seen.insert(s.id.as_str()) {
                return Err(err(format!("{at}: duplicate sample id `{}`", s.id)));
            }
            for p in set.profiles() {
                if !s.inputs.contains_key(&p.name) {
                    return Err(err(format!("{at}: missing input for modality `{}`", p.name)));
                }
            }
            for (name, path) in &s.inputs {
                if set.position(name).is_err() {
                    return Err(err(format!("{at}: input for undeclared modality `{name}`")));
                }
                check_relative(path).map_err(|r| err(format!("{at}: {name}: {r}")))?;
            }
            if let Some(label) = &s.label {
                check_relative(label).map_err(|r| err(format!("{at}: label: {r}")))?;
            }
        }
        Ok(())
    }

    pub fn check_files(&self) -> Result<()> {
        for s in &self.samples {
            let files = s.inputs.iter().map(|(m, p)| (m.as_str(), p)).chain(s.label.iter().map(|p| ("label", p)));
            for (what, rel) in files {
                if !self.resolve(rel).is_file() {
                    return Err(Error::Manifest {
                        path: self.root.clone(),
                        reason: format!("sample `{}`: {what} file {rel} does not exist", s.id),
                    });
                }
            }
        }
        Ok(())
    }
}

fn check_relative(path: &str) -> std::result::Result<(), String> {
    let p = Path::new(path);
    if path.is_empty() {
        return Err("empty path".into());
    }
    if p.components().any(|c| matches!(c, Component::RootDir | Component::Prefix(_))) {
        return Err(format!("path {path} must be relative to the manifest"));
    }
    Ok(())
}
