//! Built-in predictors and the file-based external predictor protocol.
//!
//! An external predictor is launched as
//! `<command> --manifest <path> --output <dir>` and must write one label map per
//! sample to `<dir>/<sample_id>.png` (8/16-bit gray) or `.mmtb`, then exit 0.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use crate::corrupt::mean_severity;
use crate::dataset::{read_label, Manifest};
use crate::error::{Error, Result};
use crate::harness::config::{BuiltinPredictor, CommandTemplate, PredictorRef};
use crate::metrics::LabelMap;
use crate::modality::ModalitySet;
use crate::rng::{SeedContext, Xoshiro256StarStar};
use crate::scenario::ScenarioSpec;

const DIAGNOSTIC_BYTES: u64 = 4096;

/// Per-sample label maps keyed by sample id.
pub type Predictions = BTreeMap<String, LabelMap>;

/// Ground truth with each scored pixel replaced, with probability
/// `alpha * mean severity`, by a uniformly drawn different class.
pub fn predict_degraded_oracle(
    truth: &LabelMap,
    classes: usize,
    spec: &ScenarioSpec,
    set: &ModalitySet,
    alpha: f64,
    seed: u64,
) -> Result<LabelMap> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Parameter {
            name: "alpha",
            value: alpha,
            reason: "must lie in [0, 1]",
        });
    }
    let q = alpha * mean_severity(spec, set)?;
    let mut out = truth.clone();
    if q == 0.0 || classes < 2 {
        return Ok(out);
    }
    let ignore = truth.ignore_index();
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    for v in out.data_mut() {
        if *v == ignore {
            continue;
        }
        if rng.next_f64() < q {
            let other = rng.below(classes as u64 - 1) as u16;
            *v = if other >= *v { other + 1 } else { other };
        }
    }
    Ok(out)
}

pub fn oracle_seed(global_seed: u64, spec: &ScenarioSpec, sample_id: &str) -> u64 {
    SeedContext::new(global_seed, &format!("{}/oracle", spec.id), "prediction", sample_id).stream_seed()
}

/// Computes one sample's prediction for a built-in predictor.
pub fn predict_builtin(
    builtin: &BuiltinPredictor,
    truth: &LabelMap,
    classes: usize,
    spec: &ScenarioSpec,
    set: &ModalitySet,
    global_seed: u64,
    sample_id: &str,
) -> Result<LabelMap> {
    match builtin {
        BuiltinPredictor::GroundTruth => Ok(truth.clone()),
        BuiltinPredictor::Constant { class } => {
            if *class as usize >= classes {
                return Err(Error::ClassOutOfRange {
                    id: *class,
                    classes,
                    index: 0,
                });
            }
            Ok(LabelMap::filled(truth.height(), truth.width(), *class, truth.ignore_index()))
        }
        BuiltinPredictor::DegradedOracle { alpha } => predict_degraded_oracle(
            truth,
            classes,
            spec,
            set,
            *alpha,
            oracle_seed(global_seed, spec, sample_id),
        ),
    }
}

/// Path of the prediction for `sample_id`, preferring PNG over MMTB.
pub fn prediction_path(out_dir: &Path, sample_id: &str) -> Result<PathBuf> {
    ["png", "mmtb"]
        .iter()
        .map(|ext| out_dir.join(format!("{sample_id}.{ext}")))
        .find(|p| p.is_file())
        .ok_or_else(|| Error::MissingPrediction {
            sample: sample_id.to_string(),
            dir: out_dir.to_path_buf(),
        })
}

pub fn read_prediction(out_dir: &Path, sample_id: &str, ignore_index: u16) -> Result<LabelMap> {
    read_label(&prediction_path(out_dir, sample_id)?, ignore_index)
}

fn tail(path: &Path) -> String {
    let Ok(mut f) = File::open(path) else {
        return String::new();
    };
    let len = f.metadata().map(|m| m.len()).unwrap_or(0);
    let _ = f.seek(SeekFrom::Start(len.saturating_sub(DIAGNOSTIC_BYTES)));
    let mut buf = Vec::new();
    let _ = f.read_to_end(&mut buf);
    String::from_utf8_lossy(&buf).trim().to_string()
}

/// Launches an external predictor and waits for it. Its stdout and stderr go to
/// `log_path`; the tail of that log is attached to failures.
pub fn run_external(
    command: &CommandTemplate,
    manifest_path: &Path,
    out_dir: &Path,
    timeout: Duration,
    log_path: &Path,
) -> Result<()> {
    let argv = command.argv(manifest_path, out_dir);
    fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let log = File::create(log_path).map_err(|e| Error::io(format!("creating {}", log_path.display()), e))?;
    let log_err = log
        .try_clone()
        .map_err(|e| Error::io("duplicating predictor log handle", e))?;
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(log)
        .stderr(log_err)
        .spawn()
        .map_err(|e| Error::PredictorFailed {
            manifest: manifest_path.to_path_buf(),
            status: "spawn failure".into(),
            diagnostics: format!("{}: {e}", argv[0]),
        })?;
    let start = Instant::now();
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) if start.elapsed() >= timeout => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::PredictorTimeout {
                    manifest: manifest_path.to_path_buf(),
                    secs: timeout.as_secs(),
                });
            }
            Ok(None) => thread::sleep(Duration::from_millis(10)),
            Err(e) => return Err(Error::io("waiting for predictor", e)),
        }
    };
    if !status.success() {
        return Err(Error::PredictorFailed {
            manifest: manifest_path.to_path_buf(),
            status: status.to_string(),
            diagnostics: tail(log_path),
        });
    }
    Ok(())
}

/// Everything a predictor invocation needs for one scenario.
pub struct PredictionRequest<'a> {
    /// Corrupted dataset handed to the predictor, without labels.
    pub manifest: &'a Manifest,
    pub manifest_path: &'a Path,
    /// Source dataset carrying ground truth, used by built-in predictors.
    pub truth: &'a Manifest,
    pub spec: &'a ScenarioSpec,
    pub global_seed: u64,
    pub out_dir: &'a Path,
}

/// Runs the predictor and collects every sample's label map.
pub fn invoke_predictor(predictor: &PredictorRef, req: &PredictionRequest<'_>) -> Result<Predictions> {
    let ignore = req.truth.ignore_index;
    match predictor {
        PredictorRef::External { command, timeout_secs } => {
            let log = req.out_dir.with_extension("log");
            run_external(
                command,
                req.manifest_path,
                req.out_dir,
                Duration::from_secs(*timeout_secs),
                &log,
            )?;
            req.manifest
                .samples
                .iter()
                .map(|s| Ok((s.id.clone(), read_prediction(req.out_dir, &s.id, ignore)?)))
                .collect()
        }
        PredictorRef::Builtin(builtin) => {
            let set = req.truth.modality_set()?;
            req.truth
                .samples
                .iter()
                .map(|s| {
                    let label = s.label.as_ref().ok_or_else(|| Error::Manifest {
                        path: req.truth.root().to_path_buf(),
                        reason: format!("sample `{}` has no label", s.id),
                    })?;
                    let truth = read_label(&req.truth.resolve(label), ignore)?;
                    let pred = predict_builtin(
                        builtin,
                        &truth,
                        req.truth.class_count(),
                        req.spec,
                        &set,
                        req.global_seed,
                        &s.id,
                    )?;
                    Ok((s.id.clone(), pred))
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modality::ModalitySubset;

    #[test]
    fn oracle_is_exact_when_clean() {
        let set = ModalitySet::deliver();
        let spec = ScenarioSpec::emm(&set, ModalitySubset::EMPTY).unwrap();
        let truth = LabelMap::new(2, 2, vec![0, 1, 2, 255], 255).unwrap();
        assert_eq!(predict_degraded_oracle(&truth, 3, &spec, &set, 1.0, 7).unwrap(), truth);
        assert!(predict_degraded_oracle(&truth, 3, &spec, &set, 1.5, 7).is_err());
    }

    #[test]
    fn oracle_flip_rate_matches_severity() {
        let set = ModalitySet::deliver();
        let spec = ScenarioSpec::emm(&set, set.subset(&["D", "E", "L"]).unwrap()).unwrap();
        let n = 400 * 400;
        let truth = LabelMap::new(400, 400, (0..n).map(|i| (i % 5) as u16).collect(), 255).unwrap();
        let pred = predict_degraded_oracle(&truth, 5, &spec, &set, 1.0, 99).unwrap();
        assert_eq!(pred, predict_degraded_oracle(&truth, 5, &spec, &set, 1.0, 99).unwrap());
        let flipped = pred.data().iter().zip(truth.data()).filter(|(a, b)| a != b).count();
        let q = 0.75;
        let sd = (n as f64 * q * (1.0 - q)).sqrt();
        assert!((flipped as f64 - q * n as f64).abs() < 5.0 * sd, "flipped {flipped}");
        assert!(pred.data().iter().all(|&v| v < 5));
    }

    #[test]
    fn constant_predictor() {
        let set = ModalitySet::deliver();
        let spec = ScenarioSpec::emm(&set, ModalitySubset::EMPTY).unwrap();
        let truth = LabelMap::new(1, 3, vec![0, 255, 1], 255).unwrap();
        let pred = predict_builtin(&BuiltinPredictor::Constant { class: 3 }, &truth, 5, &spec, &set, 0, "a").unwrap();
        assert_eq!(pred.data(), [3, 3, 3]);
        assert!(predict_builtin(&BuiltinPredictor::Constant { class: 9 }, &truth, 5, &spec, &set, 0, "a").is_err());
    }
}
