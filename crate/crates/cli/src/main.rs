mod render;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mmrb::aggregate::{summarize, ExpectedValue, MetricRecord, RobustnessReport};
use mmrb::dataset::{generate_synthetic, Manifest, SyntheticConfig};
use mmrb::harness::{materialize_scenario, plan_scenarios, run_benchmark_with, BenchmarkConfig, SeedEntry};
use mmrb::modality::{ModalityProfile, ModalitySet};
use mmrb::scenario::{NoiseLevel, Regime, ScenarioKind, ScenarioSpec};

#[derive(Parser)]
#[command(name = "mmrb", version, about = "Robustness benchmark for multi-modal segmentation under modality failure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset.
    Synth {
        #[arg(long, default_value_t = 8)]
        samples: usize,
        /// Height and width in pixels.
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, env = "MMRB_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Store every modality as MMTB instead of PNG.
        #[arg(long)]
        mmtb: bool,
    },
    /// Materialize one corruption scenario of a dataset.
    #[command(group(ArgGroup::new("regime").required(true).args(["emm", "rmm", "nm"])))]
    Corrupt {
        manifest: PathBuf,
        /// Zero entire modalities.
        #[arg(long)]
        emm: bool,
        /// Zero a random fraction of each listed modality.
        #[arg(long)]
        rmm: bool,
        /// Gaussian plus salt-and-pepper noise.
        #[arg(long)]
        nm: bool,
        /// Modalities to corrupt, by name or letter. For --nm defaults to all.
        #[arg(long, value_delimiter = ',')]
        drop: Vec<String>,
        /// Fraction of elements zeroed under --rmm.
        #[arg(long)]
        r: Option<f64>,
        /// Noise preset: low, mid or high.
        #[arg(long, default_value = "high")]
        level: String,
        #[arg(long)]
        density: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, env = "MMRB_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a benchmark configuration and write report.json.
    Run {
        config: PathBuf,
        /// Overrides the configured global seed.
        #[arg(long, env = "MMRB_SEED")]
        seed: Option<u64>,
        /// Overrides the configured worker count.
        #[arg(long)]
        parallelism: Option<usize>,
        /// Suppress per-scenario progress lines.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Average and expected mIoU of per-combination record files.
    Aggregate {
        /// JSON objects mapping intact-set labels such as "RD" to mIoU.
        #[arg(required = true)]
        records: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.1, 0.05])]
        p: Vec<f64>,
        /// Modality letters in canonical order; inferred from the full label otherwise.
        #[arg(long)]
        modalities: Option<String>,
        /// Emit JSON instead of a table.
        #[arg(long)]
        json: bool,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit CSV tables from one or more report.json files.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Column names, one per report; defaults to file or parent directory names.
        #[arg(long, value_delimiter = ',')]
        names: Vec<String>,
        #[arg(long, value_enum, default_value_t = Format::Combinations)]
        format: Format,
        /// Regime for combination and radar tables, e.g. emm or rmm-r0.75.
        #[arg(long)]
        regime: Option<String>,
        /// Write every table into this directory instead of printing one.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Combinations,
    Radar,
    Summary,
}

/// Bad invocation detected after parsing; exits 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<mmrb::Error>() {
        Some(e) if e.is_validation() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth { samples, size, classes, seed, out, mmtb } => {
            let mut cfg = SyntheticConfig::new(samples, size, classes, seed);
            cfg.mmtb_only = mmtb;
            generate_synthetic(&cfg, &out)?;
            println!("{}", out.join("manifest.json").display());
            Ok(())
        }
        Command::Corrupt { manifest, emm, rmm, nm, drop, r, level, density, sigma, mu, seed, out } => {
            let kind = match (emm, rmm, nm) {
                (true, _, _) => ScenarioKind::Emm,
                (_, true, _) => ScenarioKind::Rmm,
                _ => ScenarioKind::Nm,
            };
            let noise = CorruptNoise { level, density, sigma, mu };
            cmd_corrupt(&manifest, kind, &drop, r, noise, seed, &out)
        }
        Command::Run { config, seed, parallelism, quiet } => cmd_run(&config, seed, parallelism, quiet),
        Command::Aggregate { records, p, modalities, json, out } => {
            let text = cmd_aggregate(&records, &p, modalities.as_deref(), json)?;
            emit(&text, out.as_deref())
        }
        Command::Report { reports, names, format, regime, out_dir } => {
            cmd_report(&reports, names, format, regime, out_dir.as_deref())
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

struct CorruptNoise {
    level: String,
    density: Option<f64>,
    sigma: Option<f64>,
    mu: Option<f64>,
}

impl CorruptNoise {
    fn resolve(self) -> Result<NoiseLevel> {
        let mut level = NoiseLevel::preset(&self.level)
            .ok_or_else(|| usage(format!("unknown noise level `{}` (use low, mid or high)", self.level)))?;
        if self.density.is_some() || self.sigma.is_some() || self.mu.is_some() {
            level.name = format!("{}-custom", level.name);
        }
        level.density = self.density.unwrap_or(level.density);
        level.sigma = self.sigma.unwrap_or(level.sigma);
        level.mu = self.mu.unwrap_or(level.mu);
        Ok(level)
    }
}

/// Metadata written next to a materialized scenario.
#[derive(Serialize)]
struct ScenarioInfo<'a> {
    id: &'a str,
    kind: ScenarioKind,
    /// Intact modalities as a combination label; empty when none stays clean.
    label: String,
    corrupted: String,
    regime: &'a Regime,
    global_seed: u64,
    seeds: &'a [SeedEntry],
}

fn cmd_corrupt(
    manifest: &Path,
    kind: ScenarioKind,
    drop: &[String],
    r: Option<f64>,
    noise: CorruptNoise,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let dataset = Manifest::load(manifest, true)?;
    let set = dataset.modality_set()?;
    let subset = set.subset(drop).map_err(|e| usage(format!("--drop: {e}")))?;
    if kind != ScenarioKind::Rmm && r.is_some() {
        return Err(usage("--r applies to --rmm only"));
    }
    let spec = match kind {
        ScenarioKind::Emm => ScenarioSpec::emm(&set, subset),
        ScenarioKind::Rmm => {
            let r = r.ok_or_else(|| usage("--rmm needs --r"))?;
            ScenarioSpec::rmm(&set, subset, r)
        }
        ScenarioKind::Nm => {
            let level = noise.resolve()?;
            if drop.is_empty() {
                ScenarioSpec::nm(&set, &level)
            } else {
                ScenarioSpec::nm_subset(&set, &level, subset)
            }
        }
    }
    .map_err(|e| usage(e.to_string()))?;

    let materialized = materialize_scenario(&dataset, &spec, seed, out, true)
        .with_context(|| format!("scenario `{}`", spec.id))?;
    let intact = spec.corrupted.complement(set.len());
    let info = ScenarioInfo {
        id: &spec.id,
        kind: spec.kind(),
        label: set.letters(intact),
        corrupted: set.letters(spec.corrupted),
        regime: &spec.regime,
        global_seed: seed,
        seeds: &materialized.seeds,
    };
    write_json(&info, &out.join("scenario.json"))?;
    println!("{}", out.join("manifest.json").display());
    println!("scenario: {}", spec.id);
    println!("label: {}", if info.label.is_empty() { "-" } else { &info.label });
    Ok(())
}

fn cmd_run(config: &Path, seed: Option<u64>, parallelism: Option<usize>, quiet: bool) -> Result<()> {
    let mut cfg = BenchmarkConfig::load(config)?;
    if let Some(seed) = seed {
        cfg.global_seed = seed;
    }
    if let Some(n) = parallelism {
        cfg.parallelism = n;
    }
    cfg.validate()?;
    let total = {
        let dataset = Manifest::load(&cfg.manifest, false)?;
        plan_scenarios(&dataset.modality_set()?, &cfg)?.len()
    };
    let done = AtomicUsize::new(0);
    let report = run_benchmark_with(&cfg, |record| {
        let k = done.fetch_add(1, Ordering::SeqCst) + 1;
        if !quiet {
            eprintln!("[{k}/{total}] {} mIoU {}", record.id, mmrb::aggregate::format2(record.miou));
        }
    })?;
    print!("{}", render::report_summary(&report));
    println!("report: {}", cfg.run_dir().join(mmrb::harness::REPORT_FILE).display());
    Ok(())
}

/// Letters in canonical order for a record whose labels use them.
fn infer_letters(labels: &[&str]) -> Result<String> {
    let longest = labels.iter().max_by_key(|l| l.chars().count()).copied().unwrap_or_default();
    let mut seen = Vec::new();
    for l in labels {
        for c in l.chars() {
            if !seen.contains(&c) {
                seen.push(c);
            }
        }
    }
    if seen.iter().any(|c| !longest.contains(*c)) {
        return Err(usage(
            "cannot infer the modality order: no label lists every modality; pass --modalities",
        ));
    }
    Ok(longest.to_string())
}

fn letter_set(letters: &str) -> Result<ModalitySet> {
    let profiles = letters
        .chars()
        .map(|c| ModalityProfile::new(&c.to_string(), c, 1, 0.0, 1.0, true))
        .collect();
    ModalitySet::new(profiles).map_err(|e| usage(format!("--modalities: {e}")))
}

#[derive(Serialize)]
struct AggregateRow {
    record: String,
    avg: f64,
    expected: Vec<ExpectedValue>,
}

fn record_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn cmd_aggregate(records: &[PathBuf], p_grid: &[f64], modalities: Option<&str>, json: bool) -> Result<String> {
    if p_grid.is_empty() {
        return Err(usage("--p needs at least one probability"));
    }
    for (i, &p) in p_grid.iter().enumerate() {
        if !(0.0..1.0).contains(&p) {
            return Err(usage(format!("--p[{i}]: p = {p} outside [0, 1)")));
        }
    }
    let mut rows = Vec::new();
    for path in records {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let values: BTreeMap<String, f64> = serde_json::from_str(&text)
            .map_err(|e| usage(format!("{}: expected an object of label -> mIoU: {e}", path.display())))?;
        let labels: Vec<&str> = values.keys().map(String::as_str).collect();
        let letters = match modalities {
            Some(m) => m.to_string(),
            None => infer_letters(&labels)?,
        };
        let set = letter_set(&letters)?;
        let record = MetricRecord::from_labels(ScenarioKind::Emm, None, &set, values.iter().map(|(k, v)| (k.as_str(), *v)))
            .with_context(|| path.display().to_string())?;
        let summary = summarize(&record, p_grid).with_context(|| path.display().to_string())?;
        rows.push(AggregateRow {
            record: record_name(path),
            avg: summary.avg,
            expected: summary.expected,
        });
    }
    if json {
        let mut text = serde_json::to_string_pretty(&rows)?;
        text.push('\n');
        return Ok(text);
    }
    let mut header = render::summary_header(p_grid);
    header[0] = "record".to_string();
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![r.record.clone(), mmrb::aggregate::format2(r.avg)];
            row.extend(r.expected.iter().map(|e| mmrb::aggregate::format2(e.value)));
            row
        })
        .collect();
    Ok(render::table(&header, &cells))
}

fn default_name(path: &Path) -> String {
    // runs/<run_id>/report.json is named after the run directory
    if path.file_name().is_some_and(|n| n == "report.json") {
        if let Some(dir) = path.parent().and_then(Path::file_name) {
            return dir.to_string_lossy().into_owned();
        }
    }
    record_name(path)
}

fn cmd_report(
    paths: &[PathBuf],
    names: Vec<String>,
    format: Format,
    regime: Option<String>,
    out_dir: Option<&Path>,
) -> Result<()> {
    if !names.is_empty() && names.len() != paths.len() {
        return Err(usage(format!("--names lists {} names for {} reports", names.len(), paths.len())));
    }
    let names = if names.is_empty() { paths.iter().map(|p| default_name(p)).collect() } else { names };
    let reports: Vec<RobustnessReport> = paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("malformed report {}", p.display()))
        })
        .collect::<Result<_>>()?;
    if reports.iter().all(RobustnessReport::is_empty) {
        bail!("nothing to report");
    }
    let regimes = render::combination_regimes(&reports);

    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut written = Vec::new();
        for regime in &regimes {
            let path = dir.join(format!("{regime}.csv"));
            fs::write(&path, render::combinations_csv(&reports, &names, regime))?;
            written.push(path);
            let path = dir.join(format!("{regime}_radar.csv"));
            fs::write(&path, render::radar_csv(&reports, &names, regime))?;
            written.push(path);
        }
        let path = dir.join("summary.csv");
        fs::write(&path, render::summary_csv(&reports, &names))?;
        written.push(path);
        for p in written {
            println!("{}", p.display());
        }
        return Ok(());
    }

    let pick = || -> Result<String> {
        match &regime {
            Some(r) if regimes.contains(r) => Ok(r.clone()),
            Some(r) => Err(anyhow!("no regime `{r}` in the reports (available: {})", regimes.join(", "))),
            None => regimes.first().cloned().ok_or_else(|| anyhow!("reports carry no per-combination regime")),
        }
    };
    let text = match format {
        Format::Summary => render::summary_csv(&reports, &names),
        Format::Combinations => render::combinations_csv(&reports, &names, &pick()?),
        Format::Radar => render::radar_csv(&reports, &names, &pick()?),
    };
    print!("{text}");
    Ok(())
}
