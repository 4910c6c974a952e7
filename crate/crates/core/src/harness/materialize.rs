use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corrupt::apply_scenario;
use crate::dataset::{read_tensor, write_tensor, Manifest, Sample, TensorFormat};
use crate::error::{Error, Result};
use crate::rng::SeedContext;
use crate::scenario::ScenarioSpec;

/// Stream seed used for one corrupted (sample, modality) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedEntry {
    pub sample: String,
    pub modality: String,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Materialized {
    pub manifest: Manifest,
    pub seeds: Vec<SeedEntry>,
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) => fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e)),
        None => Ok(()),
    }
}

fn copy(src: &Path, dst: &Path) -> Result<()> {
    ensure_parent(dst)?;
    fs::copy(src, dst)
        .map(|_| ())
        .map_err(|e| Error::io(format!("copying {} to {}", src.display(), dst.display()), e))
}

fn extension_of(rel: &str) -> Result<&'static str> {
    Ok(TensorFormat::from_path(Path::new(rel))?.extension())
}

/// Writes the corrupted copy of `dataset` under `out_dir` and returns its manifest
/// (saved as `out_dir/manifest.json`). Files land at `<modality>/<sample>.<ext>`;
/// intact modalities are byte copies of the source. Labels are copied only when
/// `copy_labels` is set.
pub fn materialize_scenario(
    dataset: &Manifest,
    spec: &ScenarioSpec,
    global_seed: u64,
    out_dir: &Path,
    copy_labels: bool,
) -> Result<Materialized> {
    let set = dataset.modality_set()?;
    let per_sample: Vec<(Sample, Vec<SeedEntry>)> = dataset
        .samples
        .par_iter()
        .map(|sample| {
            let mut inputs = IndexMap::new();
            let mut seeds = Vec::new();
            for (pos, profile) in set.profiles().iter().enumerate() {
                let src_rel = &sample.inputs[&profile.name];
                let src = dataset.resolve(src_rel);
                let rel = format!("{}/{}.{}", profile.name, sample.id, extension_of(src_rel)?);
                let dst = out_dir.join(&rel);
                if spec.corrupted.contains(pos) {
                    let ctx = SeedContext::new(global_seed, &spec.id, &profile.name, &sample.id);
                    let clean = read_tensor(&src)?;
                    clean.check_range(profile)?;
                    let damaged = apply_scenario(&clean, spec, &set, &ctx)?;
                    damaged.check_range(profile)?;
                    ensure_parent(&dst)?;
                    write_tensor(&damaged, &dst)?;
                    seeds.push(SeedEntry {
                        sample: sample.id.clone(),
                        modality: profile.name.clone(),
                        seed: ctx.stream_seed(),
                    });
                } else {
                    copy(&src, &dst)?;
                }
                inputs.insert(profile.name.clone(), rel);
            }
            let label = match (&sample.label, copy_labels) {
                (Some(src_rel), true) => {
                    let rel = format!("labels/{}.{}", sample.id, extension_of(src_rel)?);
                    copy(&dataset.resolve(src_rel), &out_dir.join(&rel))?;
                    Some(rel)
                }
                _ => None,
            };
            Ok((
                Sample {
                    id: sample.id.clone(),
                    inputs,
                    label,
                },
                seeds,
            ))
        })
        .collect::<Result<_>>()?;

    let mut samples = Vec::with_capacity(per_sample.len());
    let mut seeds = Vec::new();
    for (s, sd) in per_sample {
        samples.push(s);
        seeds.extend(sd);
    }
    let mut manifest = Manifest::new(
        dataset.modalities.clone(),
        dataset.classes.clone(),
        dataset.ignore_index,
        samples,
        out_dir,
    );
    fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(Materialized { manifest, seeds })
}
