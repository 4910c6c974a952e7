use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::NoiseLevel;

pub const DEFAULT_P_GRID: [f64; 3] = [0.2, 0.1, 0.05];
pub const DEFAULT_R_LEVELS: [f64; 3] = [0.75, 0.5, 0.25];
pub const DEFAULT_TIMEOUT_SECS: u64 = 3600;

/// Command line of an external predictor, as one string split on whitespace or
/// as an explicit argument list. `{manifest}` and `{output}` are substituted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CommandTemplate {
    Line(String),
    Args(Vec<String>),
}

impl CommandTemplate {
    /// Substituted argv. Templates without placeholders get
    /// `--manifest <path> --output <dir>` appended.
    pub fn argv(&self, manifest: &Path, output: &Path) -> Vec<String> {
        let args: Vec<String> = match self {
            CommandTemplate::Line(s) => s.split_whitespace().map(str::to_string).collect(),
            CommandTemplate::Args(a) => a.clone(),
        };
        let (m, o) = (manifest.display().to_string(), output.display().to_string());
        let templated = args.iter().any(|a| a.contains("{manifest}") || a.contains("{output}"));
        let mut argv: Vec<String> = args
            .iter()
            .map(|a| a.replace("{manifest}", &m).replace("{output}", &o))
            .collect();
        if !templated {
            argv.extend(["--manifest".to_string(), m, "--output".to_string(), o]);
        }
        argv
    }

    fn is_empty(&self) -> bool {
        match self {
            CommandTemplate::Line(s) => s.trim().is_empty(),
            CommandTemplate::Args(a) => a.is_empty(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum BuiltinPredictor {
    GroundTruth,
    Constant { class: u16 },
    /// Flips each pixel to a random other class with probability `alpha * severity`.
    DegradedOracle { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorRef {
    External {
        command: CommandTemplate,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
    Builtin(BuiltinPredictor),
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_SECS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regimes {
    #[serde(default = "yes")]
    pub emm: bool,
    #[serde(default = "default_r_levels")]
    pub rmm: Vec<f64>,
    #[serde(default = "NoiseLevel::defaults")]
    pub nm: Vec<NoiseLevel>,
    /// Also evaluate each noise level on every partial modality subset.
    #[serde(default)]
    pub nm_subsets: bool,
}

impl Default for Regimes {
    fn default() -> Self {
        Self {
            emm: true,
            rmm: default_r_levels(),
            nm: NoiseLevel::defaults(),
            nm_subsets: false,
        }
    }
}

fn yes() -> bool {
    true
}

fn default_r_levels() -> Vec<f64> {
    DEFAULT_R_LEVELS.to_vec()
}

fn default_p_grid() -> Vec<f64> {
    DEFAULT_P_GRID.to_vec()
}

fn default_work_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_run_id() -> String {
    "run".to_string()
}

fn default_parallelism() -> usize {
    1
}

/// One benchmark run. Serialized as the run configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub manifest: PathBuf,
    #[serde(default)]
    pub regimes: Regimes,
    #[serde(default = "default_p_grid")]
    pub p_grid: Vec<f64>,
    #[serde(default)]
    pub global_seed: u64,
    pub predictor: PredictorRef,
    #[serde(default = "default_work_dir")]
    pub work_dir: PathBuf,
    #[serde(default = "default_run_id")]
    pub run_id: String,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub keep_artifacts: bool,
    /// Check that every file referenced by the manifest exists before starting.
    #[serde(default = "yes")]
    pub strict: bool,
}

impl BenchmarkConfig {
    pub fn new(manifest: impl Into<PathBuf>, predictor: PredictorRef) -> Self {
        Self {
            manifest: manifest.into(),
            regimes: Regimes::default(),
            p_grid: default_p_grid(),
            global_seed: 0,
            predictor,
            work_dir: default_work_dir(),
            run_id: default_run_id(),
            parallelism: default_parallelism(),
            keep_artifacts: false,
            strict: true,
        }
    }

    /// Parses and validates a configuration file. Relative paths resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        let mut cfg: BenchmarkConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.manifest.is_relative() {
            cfg.manifest = base.join(&cfg.manifest);
        }
        if cfg.work_dir.is_relative() {
            cfg.work_dir = base.join(&cfg.work_dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.p_grid.is_empty() {
            return bad("p_grid: must not be empty".into());
        }
        for (i, &p) in self.p_grid.iter().enumerate() {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("p_grid[{i}]: p = {p} outside [0, 1)"));
            }
        }
        for (i, &r) in self.regimes.rmm.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("regimes.rmm[{i}]: r = {r} outside [0, 1]"));
            }
        }
        let mut names = Vec::new();
        for (i, level) in self.regimes.nm.iter().enumerate() {
            if let Err(e) = level.params().validate() {
                return bad(format!("regimes.nm[{i}]: {e}"));
            }
            if level.name.is_empty() || !level.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return bad(format!("regimes.nm[{i}].name: `{}` must be alphanumeric", level.name));
            }
            if names.contains(&&level.name) {
                return bad(format!("regimes.nm[{i}].name: duplicate level `{}`", level.name));
            }
            names.push(&level.name);
        }
        let mut rs = self.regimes.rmm.clone();
        rs.sort_by(f64::total_cmp);
        if rs.windows(2).any(|w| w[0] == w[1]) {
            return bad("regimes.rmm: duplicate r value".into());
        }
        if !self.regimes.emm && self.regimes.rmm.is_empty() && self.regimes.nm.is_empty() {
            return bad("regimes: nothing to run".into());
        }
        if self.parallelism == 0 {
            return bad("parallelism: must be at least 1".into());
        }
        if self.run_id.is_empty() || self.run_id.contains(['/', '\\']) || self.run_id.starts_with('.') {
            return bad(format!("run_id: `{}` is not a plain directory name", self.run_id));
        }
        match &self.predictor {
            PredictorRef::External { command, timeout_secs } => {
                if command.is_empty() {
                    return bad("predictor.external.command: empty".into());
                }
                if *timeout_secs == 0 {
                    return bad("predictor.external.timeout_secs: must be positive".into());
                }
            }
            PredictorRef::Builtin(BuiltinPredictor::DegradedOracle { alpha }) => {
                if !(0.0..=1.0).contains(alpha) {
                    return bad(format!("predictor.builtin.alpha: {alpha} outside [0, 1]"));
                }
            }
            PredictorRef::Builtin(_) => {}
        }
        Ok(())
    }

    pub fn run_dir(&self) -> PathBuf {
        self.work_dir.join(&self.run_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> Result<BenchmarkConfig> {
        let cfg: BenchmarkConfig = serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn defaults_cover_three_levels_each() {
        let cfg = parse(r#"{"manifest": "m.json", "predictor": {"builtin": {"name": "ground_truth"}}}"#).unwrap();
        assert_eq!(cfg.p_grid, [0.2, 0.1, 0.05]);
        assert_eq!(cfg.regimes.rmm, [0.75, 0.5, 0.25]);
        let nm: Vec<_> = cfg.regimes.nm.iter().map(|l| (l.name.as_str(), l.density, l.sigma, l.mu)).collect();
        assert_eq!(nm, [("high", 0.2, 0.5, 0.0), ("mid", 0.1, 0.2, 0.0), ("low", 0.05, 0.1, 0.0)]);
        assert!(cfg.regimes.emm && !cfg.regimes.nm_subsets);
    }

    #[test]
    fn invalid_values_name_the_field() {
        let e = parse(
            r#"{"manifest": "m", "predictor": {"builtin": {"name": "ground_truth"}}, "regimes": {"rmm": [1.5]}}"#,
        )
        .unwrap_err()
        .to_string();
        assert!(e.contains("regimes.rmm[0]"), "{e}");
        let e = parse(r#"{"manifest": "m", "predictor": {"builtin": {"name": "ground_truth"}}, "p_grid": [1.0]}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("p_grid[0]"), "{e}");
        let e = parse(r#"{"manifest": "m", "predictor": {"builtin": {"name": "ground_truth"}}, "seed": 3}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("unknown field `seed`"), "{e}");
        let e = parse(r#"{"manifest": "m", "predictor": {"builtin": {"name": "degraded_oracle", "alpha": 2}}}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("alpha"), "{e}");
    }

    #[test]
    fn predictor_variants() {
        let cfg = parse(r#"{"manifest": "m", "predictor": {"external": {"command": "python adapt.py"}}}"#).unwrap();
        let PredictorRef::External { command, timeout_secs } = &cfg.predictor else {
            panic!("expected external")
        };
        assert_eq!(*timeout_secs, DEFAULT_TIMEOUT_SECS);
        assert_eq!(
            command.argv(Path::new("a/m.json"), Path::new("out")),
            ["python", "adapt.py", "--manifest", "a/m.json", "--output", "out"]
        );
        let t = CommandTemplate::Args(vec!["run".into(), "--in={manifest}".into(), "{output}".into()]);
        assert_eq!(t.argv(Path::new("m"), Path::new("o")), ["run", "--in=m", "o"]);
        assert!(parse(r#"{"manifest": "m", "predictor": {"builtin": {"name": "constant", "class": 3}}}"#).is_ok());
        assert!(parse(r#"{"manifest": "m", "predictor": {"builtin": {"name": "oracle"}}}"#).is_err());
        assert!(parse(
            r#"{"manifest": "m", "predictor": {"builtin": {"name": "ground_truth"}, "external": {"command": "x"}}}"#
        )
        .is_err());
    }
}
