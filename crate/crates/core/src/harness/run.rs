use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{BenchmarkConfig, PredictorRef};
use super::materialize::{materialize_scenario, SeedEntry};
use super::predictor::{invoke_predictor, predict_builtin, PredictionRequest};
use crate::aggregate::{build_report, summarize, MetricRecord, NmSubsetSummary, RobustnessReport};
use crate::dataset::{read_label, write_label, Manifest};
use crate::error::{Error, Result};
use crate::metrics::{ClassIou, ConfusionMatrix, LabelMap};
use crate::modality::ModalitySet;
use crate::scenario::{NoiseLevel, Regime, ScenarioKind, ScenarioSpec};

pub const REPORT_FILE: &str = "report.json";
pub const RECORD_FILE: &str = "record.json";

/// Which aggregate a scenario feeds.
#[derive(Debug, Clone, PartialEq)]
pub enum Slot {
    Emm,
    Rmm(usize),
    Nm(usize),
    NmSubset(usize),
}

#[derive(Debug, Clone)]
pub struct PlannedScenario {
    pub spec: ScenarioSpec,
    pub slot: Slot,
}

/// Scenarios in execution-independent report order: EMM subsets, each RMM level,
/// full NM levels, then per-level NM subsets when enabled.
pub fn plan_scenarios(set: &ModalitySet, cfg: &BenchmarkConfig) -> Result<Vec<PlannedScenario>> {
    let subsets = set.enumerate_corrupted_subsets();
    let mut plan = Vec::new();
    if cfg.regimes.emm {
        for &s in &subsets {
            plan.push(PlannedScenario { spec: ScenarioSpec::emm(set, s)?, slot: Slot::Emm });
        }
    }
    for (i, &r) in cfg.regimes.rmm.iter().enumerate() {
        for &s in &subsets {
            plan.push(PlannedScenario { spec: ScenarioSpec::rmm(set, s, r)?, slot: Slot::Rmm(i) });
        }
    }
    for (i, level) in cfg.regimes.nm.iter().enumerate() {
        plan.push(PlannedScenario { spec: ScenarioSpec::nm(set, level)?, slot: Slot::Nm(i) });
    }
    if cfg.regimes.nm_subsets {
        for (i, level) in cfg.regimes.nm.iter().enumerate() {
            for &s in &subsets {
                plan.push(PlannedScenario {
                    spec: ScenarioSpec::nm_subset(set, level, s)?,
                    slot: Slot::NmSubset(i),
                });
            }
        }
    }
    Ok(plan)
}

/// Result of one scenario, persisted as `record.json`.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioRecord {
    pub id: String,
    pub kind: ScenarioKind,
    /// Letters of the damaged (EMM/RMM) or noisy (NM) modalities.
    pub corrupted: String,
    /// Letters of the intact modalities, empty when every modality is affected.
    pub intact: String,
    pub regime: Regime,
    pub global_seed: u64,
    pub miou: f64,
    pub class_iou: ClassIou,
    pub confusion: Vec<Vec<u64>>,
    pub seeds: Vec<SeedEntry>,
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        context: format!("serializing {}", path.display()),
        source: e,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn remove_dir(path: &Path) -> Result<()> {
    if path.exists() {
        fs::remove_dir_all(path).map_err(|e| Error::io(format!("removing {}", path.display()), e))?;
    }
    Ok(())
}

fn truth_label(dataset: &Manifest, index: usize) -> Result<LabelMap> {
    let s = &dataset.samples[index];
    let rel = s.label.as_ref().ok_or_else(|| Error::Manifest {
        path: dataset.root().to_path_buf(),
        reason: format!("sample `{}` has no label", s.id),
    })?;
    read_label(&dataset.resolve(rel), dataset.ignore_index)
}

fn merge_all(parts: Vec<ConfusionMatrix>, classes: usize) -> Result<ConfusionMatrix> {
    parts
        .iter()
        .try_fold(ConfusionMatrix::zeros(classes), |acc, cm| acc.merge(cm))
}

/// Materializes, predicts and scores one scenario under `run_dir/<id>/`.
pub fn run_scenario(
    cfg: &BenchmarkConfig,
    dataset: &Manifest,
    spec: &ScenarioSpec,
    run_dir: &Path,
) -> Result<(ScenarioRecord, ConfusionMatrix)> {
    let set = dataset.modality_set()?;
    let classes = dataset.class_count();
    let dir = run_dir.join(&spec.id);
    remove_dir(&dir)?;
    let data_dir = dir.join("data");
    let pred_dir = dir.join("predictions");
    let materialized = materialize_scenario(dataset, spec, cfg.global_seed, &data_dir, false)?;

    let parts: Vec<ConfusionMatrix> = match &cfg.predictor {
        PredictorRef::Builtin(builtin) => {
            if cfg.keep_artifacts {
                fs::create_dir_all(&pred_dir)
                    .map_err(|e| Error::io(format!("creating {}", pred_dir.display()), e))?;
            }
            (0..dataset.samples.len())
                .into_par_iter()
                .map(|i| {
                    let id = &dataset.samples[i].id;
                    let truth = truth_label(dataset, i)?;
                    let pred = predict_builtin(builtin, &truth, classes, spec, &set, cfg.global_seed, id)?;
                    if cfg.keep_artifacts {
                        write_label(&pred, &pred_dir.join(format!("{id}.png")))?;
                    }
                    let mut cm = ConfusionMatrix::zeros(classes);
                    cm.accumulate(&pred, &truth)?;
                    Ok(cm)
                })
                .collect::<Result<_>>()?
        }
        PredictorRef::External { .. } => {
            let manifest_path = data_dir.join("manifest.json");
            let predictions = invoke_predictor(
                &cfg.predictor,
                &PredictionRequest {
                    manifest: &materialized.manifest,
                    manifest_path: &manifest_path,
                    truth: dataset,
                    spec,
                    global_seed: cfg.global_seed,
                    out_dir: &pred_dir,
                },
            )?;
            (0..dataset.samples.len())
                .into_par_iter()
                .map(|i| {
                    let truth = truth_label(dataset, i)?;
                    let mut cm = ConfusionMatrix::zeros(classes);
                    cm.accumulate(&predictions[&dataset.samples[i].id], &truth)?;
                    Ok(cm)
                })
                .collect::<Result<_>>()?
        }
    };
    let confusion = merge_all(parts, classes)?;

    let record = ScenarioRecord {
        id: spec.id.clone(),
        kind: spec.kind(),
        corrupted: set.letters(spec.corrupted),
        intact: set.letters(spec.corrupted.complement(set.len())),
        regime: spec.regime.clone(),
        global_seed: cfg.global_seed,
        miou: confusion.mean_iou()?,
        class_iou: confusion.class_iou(),
        confusion: confusion.rows(),
        seeds: materialized.seeds,
    };
    write_json(&record, &dir.join(RECORD_FILE))?;
    if !cfg.keep_artifacts {
        remove_dir(&data_dir)?;
        remove_dir(&pred_dir)?;
        let log = pred_dir.with_extension("log");
        if log.exists() {
            fs::remove_file(&log).map_err(|e| Error::io(format!("removing {}", log.display()), e))?;
        }
    }
    Ok((record, confusion))
}

/// Runs every configured scenario and writes `report.json` into the run directory.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<RobustnessReport> {
    run_benchmark_with(cfg, |_| {})
}

/// As [`run_benchmark`], calling `progress` after each finished scenario.
pub fn run_benchmark_with<F>(cfg: &BenchmarkConfig, progress: F) -> Result<RobustnessReport>
where
    F: Fn(&ScenarioRecord) + Sync,
{
    cfg.validate()?;
    let dataset = Manifest::load(&cfg.manifest, cfg.strict)?;
    if dataset.samples.is_empty() {
        return Err(Error::Manifest {
            path: cfg.manifest.clone(),
            reason: "no samples".into(),
        });
    }
    let set = dataset.modality_set()?;
    let plan = plan_scenarios(&set, cfg)?;
    let run_dir: PathBuf = cfg.run_dir();
    fs::create_dir_all(&run_dir).map_err(|e| Error::io(format!("creating {}", run_dir.display()), e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| Error::Config(format!("parallelism: {e}")))?;
    let outcomes: Vec<(ScenarioRecord, ConfusionMatrix)> = pool.install(|| {
        plan.par_iter()
            .map(|p| {
                let out = run_scenario(cfg, &dataset, &p.spec, &run_dir).map_err(|e| e.in_scenario(&p.spec.id))?;
                progress(&out.0);
                Ok(out)
            })
            .collect::<Result<_>>()
    })?;

    let new_record = |kind, r| MetricRecord::new(kind, r, set.clone());
    let mut emm = cfg.regimes.emm.then(|| new_record(ScenarioKind::Emm, None));
    let mut rmm: Vec<MetricRecord> = cfg.regimes.rmm.iter().map(|&r| new_record(ScenarioKind::Rmm, Some(r))).collect();
    let mut nm: Vec<(NoiseLevel, ConfusionMatrix)> = Vec::new();
    let mut nm_sub: Vec<MetricRecord> = cfg.regimes.nm.iter().map(|_| new_record(ScenarioKind::Nm, None)).collect();
    for (p, (record, cm)) in plan.iter().zip(outcomes) {
        let corrupted = p.spec.corrupted;
        match p.slot {
            Slot::Emm => emm.as_mut().expect("planned with emm").insert(corrupted, record.miou)?,
            Slot::Rmm(i) => rmm[i].insert(corrupted, record.miou)?,
            Slot::Nm(i) => nm.push((cfg.regimes.nm[i].clone(), cm)),
            Slot::NmSubset(i) => nm_sub[i].insert(corrupted, record.miou)?,
        }
    }

    let mut report = build_report(emm.as_ref(), &rmm, &nm, &cfg.p_grid)?;
    report.modalities = set.profiles().iter().map(|p| p.letter.to_string()).collect();
    report.classes = dataset.classes.clone();
    if cfg.regimes.nm_subsets {
        report.nm_subsets = cfg
            .regimes
            .nm
            .iter()
            .zip(&nm_sub)
            .map(|(level, record)| {
                Ok(NmSubsetSummary {
                    level: level.name.clone(),
                    summary: summarize(record, &cfg.p_grid)?,
                })
            })
            .collect::<Result<_>>()?;
    }
    write_json(&report, &run_dir.join(REPORT_FILE))?;
    Ok(report)
}
