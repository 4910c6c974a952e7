use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mmrb::aggregate::{format2, RobustnessReport};

fn mmrb(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmrb"))
        .args(args)
        .current_dir(cwd)
        .env_remove("MMRB_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn fixture(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel).display().to_string()
}

fn synth(dir: &Path, seed: &str) -> PathBuf {
    let o = mmrb(&["synth", "--samples", "3", "--size", "24", "--classes", "4", "--seed", seed, "--out", "ds"], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join("ds/manifest.json")
}

#[test]
fn synth_requires_out_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mmrb(&["synth", "--samples", "4"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--out"));

    let o = mmrb(&["synth", "--samples", "4", "--size", "64", "--classes", "5", "--seed", "7", "--out", "a"], tmp.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), Path::new("a").join("manifest.json").display().to_string());
    mmrb(&["synth", "--samples", "4", "--size", "64", "--classes", "5", "--seed", "7", "--out", "b"], tmp.path());
    for rel in ["manifest.json", "labels/0003.png", "depth/0001.png", "event/0004.png"] {
        assert_eq!(fs::read(tmp.path().join("a").join(rel)).unwrap(), fs::read(tmp.path().join("b").join(rel)).unwrap());
    }
}

#[test]
fn seed_flag_beats_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |out: &str, flag: Option<&str>, env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_mmrb"));
        cmd.args(["synth", "--samples", "1", "--size", "16", "--out", out]).current_dir(tmp.path());
        cmd.env_remove("MMRB_SEED");
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        if let Some(e) = env {
            cmd.env("MMRB_SEED", e);
        }
        assert!(cmd.output().unwrap().status.success());
        fs::read(tmp.path().join(out).join("labels/0001.png")).unwrap()
    };
    let seed3 = run("s3", Some("3"), None);
    assert_eq!(run("env3", None, Some("3")), seed3);
    assert_eq!(run("flag3", Some("3"), Some("4")), seed3);
    assert_ne!(run("env4", None, Some("4")), seed3);
}

#[test]
fn corrupt_reports_scenario_and_label() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "1");
    let o = mmrb(&["corrupt", "ds/manifest.json", "--emm", "--drop", "E,L", "--out", "emm"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("label: RD"));
    let info: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("emm/scenario.json")).unwrap()).unwrap();
    assert_eq!(info["label"], "RD");
    assert_eq!(info["id"], "emm-drop-EL");

    let o = mmrb(&["corrupt", "ds/manifest.json", "--rmm", "--drop", "rgb", "--r", "0.75", "--out", "rmm"], tmp.path());
    assert!(stdout(&o).contains("scenario: rmm-r0.75-drop-R"), "{}", stderr(&o));

    let o = mmrb(&["corrupt", "ds/manifest.json", "--nm", "--level", "high", "--out", "nm"], tmp.path());
    assert!(o.status.success());
    let info: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("nm/scenario.json")).unwrap()).unwrap();
    assert_eq!(info["regime"]["noise"], serde_json::json!({"density": 0.2, "sigma": 0.5, "mu": 0.0}));

    assert_eq!(mmrb(&["corrupt", "ds/manifest.json", "--out", "x"], tmp.path()).status.code(), Some(2));
    assert_eq!(mmrb(&["corrupt", "ds/manifest.json", "--rmm", "--drop", "R", "--out", "x"], tmp.path()).status.code(), Some(2));
    assert_eq!(
        mmrb(&["corrupt", "ds/manifest.json", "--emm", "--drop", "R,D,E,L", "--out", "x"], tmp.path()).status.code(),
        Some(2)
    );
    assert_eq!(mmrb(&["corrupt", "missing.json", "--emm", "--out", "x"], tmp.path()).status.code(), Some(1));
}

#[test]
fn aggregate_fixtures_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mmrb(&["aggregate", &fixture("emm/cmnext.json"), &fixture("emm/stitchfusion.json")], tmp.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("cmnext        37.90     54.46     60.41      63.38"), "{text}");
    assert!(text.contains("stitchfusion  41.98     58.02     63.29      65.80"), "{text}");
    // pure: same input, same bytes
    assert_eq!(o.stdout, mmrb(&["aggregate", &fixture("emm/cmnext.json"), &fixture("emm/stitchfusion.json")], tmp.path()).stdout);

    let labels = "R D E L RD RE RL DE DL EL RDE RDL REL DEL RDEL".split(' ');
    let constant: serde_json::Map<_, _> = labels.clone().map(|l| (l.to_string(), serde_json::json!(50.0))).collect();
    fs::write(tmp.path().join("const.json"), serde_json::to_string(&constant).unwrap()).unwrap();
    let o = mmrb(&["aggregate", "const.json", "--json"], tmp.path());
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows[0]["avg"], 50.0);
    assert!(rows[0]["expected"].as_array().unwrap().iter().all(|e| e["value"] == 50.0));

    let partial: serde_json::Map<_, _> = labels.take(13).map(|l| (l.to_string(), serde_json::json!(50.0))).collect();
    fs::write(tmp.path().join("partial.json"), serde_json::to_string(&partial).unwrap()).unwrap();
    let o = mmrb(&["aggregate", "partial.json", "--modalities", "RDEL"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("DEL, RDEL"), "{}", stderr(&o));

    fs::write(tmp.path().join("bad.json"), r#"{"RD": 50, "RX": 40}"#).unwrap();
    assert_eq!(mmrb(&["aggregate", "bad.json", "--modalities", "RD"], tmp.path()).status.code(), Some(2));
    assert_eq!(mmrb(&["aggregate", "const.json", "--p", "1.0"], tmp.path()).status.code(), Some(2));
}

fn write_config(dir: &Path, body: &str) -> String {
    fs::write(dir.join("cfg.json"), body).unwrap();
    "cfg.json".to_string()
}

#[test]
fn run_prints_values_matching_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "2");
    let cfg = write_config(
        tmp.path(),
        r#"{"manifest": "ds/manifest.json", "predictor": {"builtin": {"name": "degraded_oracle", "alpha": 0.8}},
            "regimes": {"rmm": [0.5], "nm": [{"name": "high", "density": 0.2, "sigma": 0.5}]}}"#,
    );
    let o = mmrb(&["run", &cfg, "-q"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let report: RobustnessReport =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("runs/run/report.json")).unwrap()).unwrap();
    let emm = report.emm.as_ref().unwrap();
    assert_eq!(report.p_grid, [0.2, 0.1, 0.05]);
    assert_eq!(emm.expected.len(), 3);
    let line = text.lines().find(|l| l.starts_with("emm ")).unwrap();
    let cells: Vec<&str> = line.split_whitespace().collect();
    let want: Vec<String> = std::iter::once(format2(emm.avg)).chain(emm.expected.iter().map(|e| format2(e.value))).collect();
    assert_eq!(&cells[1..], want.iter().map(String::as_str).collect::<Vec<_>>());
    let nm_line = text.lines().find(|l| l.starts_with("nm-high")).unwrap();
    assert!(nm_line.ends_with(&format2(report.nm[0].miou)));

    // env seed overrides the config, the flag overrides the env
    let seeded = |args: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_mmrb"));
        cmd.arg("run").arg(&cfg).arg("-q").args(args).current_dir(tmp.path()).env_remove("MMRB_SEED");
        if let Some(e) = env {
            cmd.env("MMRB_SEED", e);
        }
        assert!(cmd.output().unwrap().status.success());
        fs::read(tmp.path().join("runs/run/report.json")).unwrap()
    };
    let base = seeded(&[], None);
    let env5 = seeded(&[], Some("5"));
    assert_ne!(base, env5);
    assert_eq!(seeded(&["--seed", "5"], Some("6")), env5);
    assert_eq!(seeded(&["--seed", "0"], Some("5")), base);
}

#[test]
fn run_rejects_invalid_configs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"manifest": "m.json", "predictor": {"builtin": {"name": "ground_truth"}}, "regimes": {"rmm": [1.5]}}"#,
    );
    let o = mmrb(&["run", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("regimes.rmm[0]"), "{}", stderr(&o));

    let cfg = write_config(tmp.path(), r#"{"manifest": "m.json", "predictor": {"builtin": {"name": "ground_truth"}}, "sed": 1}"#);
    assert_eq!(mmrb(&["run", &cfg], tmp.path()).status.code(), Some(2));

    // valid config, failing predictor: runtime error naming the scenario
    synth(tmp.path(), "1");
    let cfg = write_config(
        tmp.path(),
        r#"{"manifest": "ds/manifest.json", "predictor": {"external": {"command": ["sh", "-c", "exit 3"]}},
            "regimes": {"rmm": [], "nm": []}}"#,
    );
    let o = mmrb(&["run", &cfg, "-q"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("scenario `emm-"), "{}", stderr(&o));
}

#[test]
fn report_csv_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "4");
    let cfg = write_config(
        tmp.path(),
        r#"{"manifest": "ds/manifest.json", "predictor": {"builtin": {"name": "degraded_oracle", "alpha": 0.5}},
            "regimes": {"rmm": [0.25], "nm": []}, "run_id": "a"}"#,
    );
    assert!(mmrb(&["run", &cfg, "-q"], tmp.path()).status.success());
    let cfg = write_config(
        tmp.path(),
        r#"{"manifest": "ds/manifest.json", "predictor": {"builtin": {"name": "ground_truth"}},
            "regimes": {"rmm": [], "nm": []}, "run_id": "b"}"#,
    );
    assert!(mmrb(&["run", &cfg, "-q"], tmp.path()).status.success());

    let o = mmrb(&["report", "runs/a/report.json"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "combination,a");
    assert_eq!(lines.len(), 16);
    let order: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(order.join(" "), "R D E L RD RE RL DE DL EL RDE RDL REL DEL RDEL");

    let o = mmrb(&["report", "runs/a/report.json", "runs/b/report.json", "--names", "oracle,truth"], tmp.path());
    let csv = stdout(&o);
    assert!(csv.starts_with("combination,oracle,truth\n"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",100.00")), "{csv}");

    let o = mmrb(&["report", "runs/a/report.json", "runs/b/report.json", "--out-dir", "csv"], tmp.path());
    assert!(o.status.success());
    for f in ["emm.csv", "emm_radar.csv", "rmm-r0.25.csv", "rmm-r0.25_radar.csv", "summary.csv"] {
        assert!(tmp.path().join("csv").join(f).is_file(), "{f}");
    }
    let radar = fs::read_to_string(tmp.path().join("csv/emm_radar.csv")).unwrap();
    assert_eq!(radar.lines().count(), 1 + 2 * 15);
    let summary = fs::read_to_string(tmp.path().join("csv/summary.csv")).unwrap();
    assert!(summary.contains("rmm-r0.25,avg,"));
    assert!(summary.contains("\nemm,avg,") && summary.contains(",100.00\n"));

    fs::write(tmp.path().join("empty.json"), r#"{"modalities": [], "p_grid": [0.2]}"#).unwrap();
    let o = mmrb(&["report", "empty.json"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nothing to report"));
    fs::write(tmp.path().join("junk.json"), "[1, 2]").unwrap();
    assert_eq!(mmrb(&["report", "junk.json"], tmp.path()).status.code(), Some(1));
}
