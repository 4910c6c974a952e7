//! Seeded synthetic datasets for running the benchmark without real data.
//!
//! Labels are Voronoi partitions of random sites. Each modality channel encodes
//! the class as a band of its value range, shifted by modality and channel
//! position, so clean inputs decode back to the exact label map.

use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{write_label, write_tensor, Manifest, Sample};
use crate::error::{Error, Result};
use crate::metrics::{LabelMap, DEFAULT_IGNORE_INDEX};
use crate::modality::{deliver_profiles, ModalityProfile, ModalitySet};
use crate::rng::{SeedContext, Xoshiro256StarStar};
use crate::tensor::{DType, TensorBuffer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorFormat {
    Png,
    Mmtb,
}

impl TensorFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("png") => Ok(TensorFormat::Png),
            Some("mmtb") => Ok(TensorFormat::Mmtb),
            _ => Err(Error::format(path, "unknown tensor extension (use .png or .mmtb)")),
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            TensorFormat::Png => "png",
            TensorFormat::Mmtb => "mmtb",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_samples: usize,
    pub height: usize,
    pub width: usize,
    pub class_count: usize,
    pub modalities: Vec<ModalityProfile>,
    pub seed: u64,
    /// Force MMTB for every modality; otherwise PNG is used where it can hold the data.
    pub mmtb_only: bool,
}

impl SyntheticConfig {
    pub fn new(n_samples: usize, size: usize, class_count: usize, seed: u64) -> Self {
        Self {
            n_samples,
            height: size,
            width: size,
            class_count,
            modalities: deliver_profiles(),
            seed,
            mmtb_only: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::Config("synthetic dataset needs positive dimensions".into()));
        }
        if !(2..=DEFAULT_IGNORE_INDEX as usize).contains(&self.class_count) {
            return Err(Error::Config(format!(
                "class_count must lie in 2..={DEFAULT_IGNORE_INDEX}, got {}",
                self.class_count
            )));
        }
        ModalitySet::new(self.modalities.clone())?;
        Ok(())
    }
}

/// Class code stored in channel `channel` of the modality at `position`.
fn channel_code(class: usize, position: usize, channel: usize, classes: usize) -> usize {
    (class + position + channel) % classes
}

fn encode_value(code: usize, classes: usize, profile: &ModalityProfile) -> f64 {
    profile.value_min + (code as f64 + 0.5) / classes as f64 * profile.range()
}

/// Recovers the label map from one clean channel of a synthetic modality tensor.
/// Ignore pixels decode to an arbitrary class.
pub fn decode_labels(
    tensor: &TensorBuffer,
    profile: &ModalityProfile,
    position: usize,
    channel: usize,
    classes: usize,
) -> Vec<u16> {
    let plane = tensor.height() * tensor.width();
    let offset = channel * plane;
    (0..plane)
        .map(|i| {
            let v = (tensor.data().get(offset + i) - profile.value_min) / profile.range();
            let code = ((v * classes as f64).floor() as usize).min(classes - 1);
            ((code + classes - (position + channel) % classes) % classes) as u16
        })
        .collect()
}

fn voronoi_labels(cfg: &SyntheticConfig, sample_id: &str) -> LabelMap {
    let seed = SeedContext::new(cfg.seed, "synthetic", "label", sample_id).stream_seed();
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let n_sites = cfg.class_count * 2;
    let sites: Vec<(i64, i64, u16)> = (0..n_sites)
        .map(|i| {
            let y = rng.below(cfg.height as u64) as i64;
            let x = rng.below(cfg.width as u64) as i64;
            let class = if i < cfg.class_count {
                i as u16
            } else {
                rng.below(cfg.class_count as u64) as u16
            };
            (y, x, class)
        })
        .collect();
    let mut data = Vec::with_capacity(cfg.height * cfg.width);
    for y in 0..cfg.height as i64 {
        for x in 0..cfg.width as i64 {
            // first nearest site wins ties
            let (_, class) = sites
                .iter()
                .map(|&(sy, sx, c)| ((sy - y).pow(2) + (sx - x).pow(2), c))
                .min_by_key(|&(d, _)| d)
                .expect("at least two sites");
            data.push(class);
        }
    }
    // top row is a void band, exercising ignore handling
    if cfg.height > 1 {
        data[..cfg.width].fill(DEFAULT_IGNORE_INDEX);
    }
    LabelMap::new(cfg.height, cfg.width, data, DEFAULT_IGNORE_INDEX).expect("shape by construction")
}

fn modality_tensor(
    labels: &LabelMap,
    profile: &ModalityProfile,
    position: usize,
    classes: usize,
) -> TensorBuffer {
    let channels = profile.channels as usize;
    let plane = labels.height() * labels.width();
    let dtype = DType::for_range(profile.value_min, profile.value_max);
    let mut t = TensorBuffer::zeros(dtype, [channels, labels.height(), labels.width()]);
    let data = t.data_mut();
    for ch in 0..channels {
        for (i, &class) in labels.data().iter().enumerate() {
            let value = if class == labels.ignore_index() {
                profile.value_min
            } else {
                encode_value(channel_code(class as usize, position, ch, classes), classes, profile)
            };
            data.set(ch * plane + i, value);
        }
    }
    t
}

fn format_for(t: &TensorBuffer, mmtb_only: bool) -> TensorFormat {
    let png_ok = matches!(
        (t.dtype(), t.channels()),
        (DType::U8, 1) | (DType::U8, 3) | (DType::U16, 1)
    );
    if png_ok && !mmtb_only {
        TensorFormat::Png
    } else {
        TensorFormat::Mmtb
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

/// Writes the dataset and `manifest.json` under `out_dir`.
pub fn generate_synthetic(cfg: &SyntheticConfig, out_dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    create_dir(&out_dir.join("labels"))?;
    for p in &cfg.modalities {
        create_dir(&out_dir.join(&p.name))?;
    }
    let mut samples = Vec::with_capacity(cfg.n_samples);
    for i in 1..=cfg.n_samples {
        let id = format!("{i:04}");
        let labels = voronoi_labels(cfg, &id);
        let label_rel = format!("labels/{id}.png");
        write_label(&labels, &out_dir.join(&label_rel))?;
        let mut inputs = IndexMap::new();
        for (pos, profile) in cfg.modalities.iter().enumerate() {
            let t = modality_tensor(&labels, profile, pos, cfg.class_count);
            let ext = format_for(&t, cfg.mmtb_only).extension();
            let rel = format!("{}/{id}.{ext}", profile.name);
            write_tensor(&t, &out_dir.join(&rel))?;
            inputs.insert(profile.name.clone(), rel);
        }
        samples.push(Sample {
            id,
            inputs,
            label: Some(label_rel),
        });
    }
    let classes = (0..cfg.class_count).map(|c| format!("class{c}")).collect();
    let mut manifest = Manifest::new(
        cfg.modalities.clone(),
        classes,
        DEFAULT_IGNORE_INDEX,
        samples,
        PathBuf::new(),
    );
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{read_label, read_tensor};

    #[test]
    fn labels_in_range_and_decodable() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SyntheticConfig::new(2, 32, 5, 3);
        let m = generate_synthetic(&cfg, dir.path()).unwrap();
        let set = m.modality_set().unwrap();
        for s in &m.samples {
            let gt = read_label(&m.resolve(s.label.as_ref().unwrap()), 255).unwrap();
            gt.validate(5).unwrap();
            assert!(gt.data()[..32].iter().all(|&v| v == 255));
            for (pos, p) in set.profiles().iter().enumerate() {
                let t = read_tensor(&m.resolve(&s.inputs[&p.name])).unwrap();
                t.check_range(p).unwrap();
                for ch in 0..p.channels as usize {
                    let decoded = decode_labels(&t, p, pos, ch, 5);
                    for (d, g) in decoded.iter().zip(gt.data()) {
                        if *g != 255 {
                            assert_eq!(d, g);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn mmtb_only_and_float_modalities() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = SyntheticConfig::new(1, 8, 3, 1);
        cfg.modalities.push(ModalityProfile::new("range", 'G', 1, 0.0, 80.5, true));
        let m = generate_synthetic(&cfg, dir.path()).unwrap();
        assert!(m.samples[0].inputs["range"].ends_with(".mmtb"));
        assert!(m.samples[0].inputs["rgb"].ends_with(".png"));
        cfg.mmtb_only = true;
        let m = generate_synthetic(&cfg, &dir.path().join("b")).unwrap();
        assert!(m.samples[0].inputs["rgb"].ends_with(".mmtb"));
    }

    #[test]
    fn rejects_bad_config() {
        let dir = tempfile::tempdir().unwrap();
        assert!(generate_synthetic(&SyntheticConfig::new(0, 8, 3, 1), dir.path()).is_err());
        assert!(generate_synthetic(&SyntheticConfig::new(1, 8, 1, 1), dir.path()).is_err());
    }
}
