//! Plain-text tables and CSV emission. Every number goes through `format2`.

use std::fmt::Write as _;

use mmrb::aggregate::{format2, RegimeSummary, RobustnessReport};

/// Left-aligned first column, right-aligned rest, two spaces between columns.
pub fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width = vec![0; cols];
    for row in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        let mut line = String::new();
        for (i, cell) in row.iter().enumerate() {
            if i == 0 {
                let _ = write!(line, "{cell:<w$}", w = width[0]);
            } else {
                let _ = write!(line, "  {cell:>w$}", w = width[i]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

pub fn summary_header(p_grid: &[f64]) -> Vec<String> {
    let mut h = vec!["regime".to_string(), "avg".to_string()];
    h.extend(p_grid.iter().map(|p| format!("E[p={p}]")));
    h
}

pub fn summary_cells(name: String, s: &RegimeSummary) -> Vec<String> {
    let mut row = vec![name, format2(s.avg)];
    row.extend(s.expected.iter().map(|e| format2(e.value)));
    row
}

/// Named regimes of a report, in report order.
pub fn regimes(report: &RobustnessReport) -> Vec<(String, &RegimeSummary)> {
    let mut out = Vec::new();
    if let Some(e) = &report.emm {
        out.push(("emm".to_string(), e));
    }
    for r in &report.rmm {
        out.push((format!("rmm-r{}", r.r), &r.summary));
    }
    for n in &report.nm_subsets {
        out.push((format!("nm-{}-subsets", n.level), &n.summary));
    }
    out
}

/// Summary table for one report: avg and expected values per regime, then the
/// full-combination noise levels.
pub fn report_summary(report: &RobustnessReport) -> String {
    let mut out = String::new();
    let rows: Vec<Vec<String>> = regimes(report)
        .into_iter()
        .map(|(name, s)| summary_cells(name, s))
        .collect();
    if !rows.is_empty() {
        out.push_str(&table(&summary_header(&report.p_grid), &rows));
    }
    if !report.nm.is_empty() {
        if !out.is_empty() {
            out.push('\n');
        }
        let header = ["level", "D", "sigma", "mu", "mIoU"].map(String::from);
        let rows: Vec<Vec<String>> = report
            .nm
            .iter()
            .map(|n| {
                vec![
                    format!("nm-{}", n.level),
                    n.density.to_string(),
                    n.sigma.to_string(),
                    n.mu.to_string(),
                    format2(n.miou),
                ]
            })
            .collect();
        out.push_str(&table(&header, &rows));
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_line(cells: &[String]) -> String {
    let mut line = cells.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

/// Regime names present in any of the reports, first-seen order.
fn regime_names(reports: &[RobustnessReport]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for r in reports {
        for (name, _) in regimes(r) {
            if !names.contains(&name) {
                names.push(name);
            }
        }
    }
    names
}

fn find<'a>(report: &'a RobustnessReport, regime: &str) -> Option<&'a RegimeSummary> {
    regimes(report).into_iter().find(|(n, _)| n == regime).map(|(_, s)| s)
}

/// One row per combination of `regime`, one column per run. Rows follow the first
/// report's table order; labels only some runs have are appended, cells left empty.
pub fn combinations_csv(reports: &[RobustnessReport], names: &[String], regime: &str) -> String {
    let summaries: Vec<Option<&RegimeSummary>> = reports.iter().map(|r| find(r, regime)).collect();
    let mut labels: Vec<&str> = Vec::new();
    for s in summaries.iter().flatten() {
        for c in &s.combinations {
            if !labels.contains(&c.label.as_str()) {
                labels.push(&c.label);
            }
        }
    }
    let mut header = vec!["combination".to_string()];
    header.extend(names.iter().cloned());
    let mut out = csv_line(&header);
    for label in labels {
        let mut row = vec![label.to_string()];
        row.extend(summaries.iter().map(|s| {
            s.and_then(|s| s.combination(label)).map(format2).unwrap_or_default()
        }));
        out.push_str(&csv_line(&row));
    }
    out
}

/// Long-form radar data: one line per (run, axis).
pub fn radar_csv(reports: &[RobustnessReport], names: &[String], regime: &str) -> String {
    let mut out = csv_line(&["run", "axis", "value"].map(String::from));
    for (report, name) in reports.iter().zip(names) {
        if let Some(s) = find(report, regime) {
            for c in &s.combinations {
                out.push_str(&csv_line(&[name.clone(), c.label.clone(), format2(c.miou)]));
            }
        }
    }
    out
}

/// Avg, expected values and noise-level scores, one row per metric.
pub fn summary_csv(reports: &[RobustnessReport], names: &[String]) -> String {
    let mut header = vec!["regime".to_string(), "metric".to_string()];
    header.extend(names.iter().cloned());
    let mut out = csv_line(&header);
    for regime in regime_names(reports) {
        let summaries: Vec<Option<&RegimeSummary>> = reports.iter().map(|r| find(r, &regime)).collect();
        let mut metrics = vec!["avg".to_string()];
        for s in summaries.iter().flatten() {
            for e in &s.expected {
                let m = format!("E[p={}]", e.p);
                if !metrics.contains(&m) {
                    metrics.push(m);
                }
            }
        }
        for metric in metrics {
            let mut row = vec![regime.clone(), metric.clone()];
            row.extend(summaries.iter().map(|s| {
                s.and_then(|s| {
                    if metric == "avg" {
                        Some(s.avg)
                    } else {
                        s.expected.iter().find(|e| format!("E[p={}]", e.p) == metric).map(|e| e.value)
                    }
                })
                .map(format2)
                .unwrap_or_default()
            }));
            out.push_str(&csv_line(&row));
        }
    }
    let mut levels: Vec<&str> = Vec::new();
    for r in reports {
        for n in &r.nm {
            if !levels.contains(&n.level.as_str()) {
                levels.push(&n.level);
            }
        }
    }
    for level in levels {
        let mut row = vec![format!("nm-{level}"), "mIoU".to_string()];
        row.extend(reports.iter().map(|r| {
            r.nm.iter().find(|n| n.level == level).map(|n| format2(n.miou)).unwrap_or_default()
        }));
        out.push_str(&csv_line(&row));
    }
    out
}

/// Regimes with per-combination data, for naming output files.
pub fn combination_regimes(reports: &[RobustnessReport]) -> Vec<String> {
    regime_names(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mmrb::aggregate::{CombinationScore, ExpectedValue};

    fn summary(avg: f64, pairs: &[(&str, f64)]) -> RegimeSummary {
        RegimeSummary {
            avg,
            expected: vec![ExpectedValue { p: 0.2, value: avg + 1.0 }],
            combinations: pairs
                .iter()
                .map(|&(label, miou)| CombinationScore {
                    label: label.into(),
                    corrupted: String::new(),
                    miou,
                })
                .collect(),
        }
    }

    #[test]
    fn table_alignment() {
        let t = table(
            &["a".into(), "bb".into()],
            &[vec!["long".into(), "1.00".into()], vec!["x".into(), "10.00".into()]],
        );
        assert_eq!(t, "a        bb\nlong   1.00\nx     10.00\n");
    }

    #[test]
    fn merged_reports_join_on_label() {
        let a = RobustnessReport {
            p_grid: vec![0.2],
            emm: Some(summary(50.0, &[("R", 40.0), ("RD", 60.0)])),
            ..Default::default()
        };
        let b = RobustnessReport {
            p_grid: vec![0.2],
            emm: Some(summary(45.0, &[("RD", 55.555), ("D", 30.0)])),
            ..Default::default()
        };
        let names = ["a".to_string(), "b,c".to_string()];
        let reports = [a, b];
        assert_eq!(
            combinations_csv(&reports, &names, "emm"),
            "combination,a,\"b,c\"\nR,40.00,\nRD,60.00,55.56\nD,,30.00\n"
        );
        assert_eq!(
            summary_csv(&reports, &names),
            "regime,metric,a,\"b,c\"\nemm,avg,50.00,45.00\nemm,E[p=0.2],51.00,46.00\n"
        );
        assert_eq!(
            radar_csv(&reports[..1], &names[..1], "emm"),
            "run,axis,value\na,R,40.00\na,RD,60.00\n"
        );
    }
}
