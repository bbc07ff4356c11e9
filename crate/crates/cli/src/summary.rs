//! Aggregates completed runs under a directory tree into one summary CSV of
//! per-condition means and standard errors, suitable for external plotting.
//!
//! A run counts only when its nearest enclosing manifest says "complete";
//! everything else is excluded and listed.

use crate::config::SummarizeArgs;
use crate::manifest::MANIFEST_FILE;
use krausopt::{Error, Result};
use serde_json::Value;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Descriptor fields that parameterize a condition rather than measure an
/// outcome; everything else numeric in a report becomes a summary metric.
const NON_METRIC_FIELDS: [&str; 12] = [
    "run_index",
    "split_index",
    "seed",
    "qubits",
    "target_rank",
    "model_kraus",
    "shots",
    "epochs",
    "split_fraction",
    "pca_components",
    "gamma",
    "step",
];

/// How many leading cumulative Choi-eigenvalue sums to summarize.
const CUMULATIVE_TOPS: usize = 3;

struct Survey {
    manifests: BTreeMap<PathBuf, String>,
    reports: Vec<PathBuf>,
}

fn walk(dir: &Path, survey: &mut Survey) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            walk(&path, survey)?;
        } else if path.file_name().is_some_and(|f| f == MANIFEST_FILE) {
            let status = std::fs::read_to_string(&path)
                .ok()
                .and_then(|text| serde_json::from_str::<Value>(&text).ok())
                .and_then(|v| v.get("status").and_then(Value::as_str).map(String::from))
                .unwrap_or_else(|| "unreadable".into());
            survey.manifests.insert(path.parent().unwrap().to_path_buf(), status);
        } else if path.file_name().is_some_and(|f| f == "report.json") {
            survey.reports.push(path);
        }
    }
    Ok(())
}

/// Status of the nearest enclosing manifest, searched up to the survey root.
fn enclosing_status<'a>(survey: &'a Survey, report: &Path, root: &Path) -> Option<&'a str> {
    let mut dir = report.parent();
    while let Some(d) = dir {
        if let Some(status) = survey.manifests.get(d) {
            return Some(status);
        }
        if d == root {
            break;
        }
        dir = d.parent();
    }
    None
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One condition's collected metric samples plus its echoed reg/γ columns.
#[derive(Default)]
struct Group {
    metrics: BTreeMap<String, Vec<f64>>,
    regs: Vec<String>,
    gammas: Vec<f64>,
}

fn uniform_or_empty<T: PartialEq + ToString>(values: &[T]) -> String {
    match values.first() {
        Some(first) if values.iter().all(|v| v == first) => first.to_string(),
        _ => String::new(),
    }
}

pub fn emit_summary(args: &SummarizeArgs) -> Result<()> {
    let root = &args.dir;
    if !root.is_dir() {
        return Err(Error::InvalidArgument(format!(
            "summarize needs an existing directory, got {}",
            root.display()
        )));
    }
    let mut survey = Survey { manifests: BTreeMap::new(), reports: Vec::new() };
    walk(root, &mut survey)?;
    if survey.reports.is_empty() && survey.manifests.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no runs found under {}",
            root.display()
        )));
    }

    let mut excluded: Vec<(PathBuf, String)> = Vec::new();
    for (dir, status) in &survey.manifests {
        if status != "complete" {
            excluded.push((dir.clone(), format!("manifest status '{status}'")));
        }
    }

    let mut groups: BTreeMap<String, Group> = BTreeMap::new();
    let mut included = 0usize;
    for report_path in &survey.reports {
        match enclosing_status(&survey, report_path, root) {
            Some("complete") => {}
            Some(_) => continue, // already listed via its manifest
            None => {
                excluded.push((report_path.clone(), "no manifest".into()));
                continue;
            }
        }
        let value: Value = match std::fs::read_to_string(report_path)
            .map_err(Error::from)
            .and_then(|text| serde_json::from_str(&text).map_err(Error::from))
        {
            Ok(v) => v,
            Err(e) => {
                excluded.push((report_path.clone(), format!("unreadable: {e}")));
                continue;
            }
        };
        let Some(obj) = value.as_object() else {
            excluded.push((report_path.clone(), "not a JSON object".into()));
            continue;
        };
        included += 1;
        let condition = obj
            .get("condition")
            .and_then(Value::as_str)
            .unwrap_or("unknown")
            .to_string();
        let group = groups.entry(condition).or_default();
        if let Some(reg) = obj.get("reg").and_then(Value::as_str) {
            group.regs.push(reg.to_string());
        }
        if let Some(gamma) = obj.get("gamma").and_then(Value::as_f64) {
            group.gammas.push(gamma);
        }
        for (key, v) in obj {
            if NON_METRIC_FIELDS.contains(&key.as_str()) {
                continue;
            }
            if let Some(x) = v.as_f64() {
                group.metrics.entry(key.clone()).or_default().push(x);
            }
        }
        if let Some(cumulative) = obj.get("cumulative").and_then(Value::as_array) {
            for (i, v) in cumulative.iter().take(CUMULATIVE_TOPS).enumerate() {
                if let Some(x) = v.as_f64() {
                    group
                        .metrics
                        .entry(format!("cum_top{}", i + 1))
                        .or_default()
                        .push(x);
                }
            }
        }
    }

    if included == 0 {
        return Err(Error::InvalidArgument(format!(
            "no complete runs under {} ({} excluded)",
            root.display(),
            excluded.len()
        )));
    }

    let mut csv = String::from("condition,reg,gamma,metric,mean,stderr,count\n");
    for (condition, group) in &groups {
        let reg = uniform_or_empty(&group.regs);
        let gamma = uniform_or_empty(&group.gammas);
        for (metric, values) in &group.metrics {
            let (mean, stderr) = mean_and_stderr(values);
            writeln!(
                csv,
                "{condition},{reg},{gamma},{metric},{mean:.16e},{stderr:.16e},{}",
                values.len()
            )
            .unwrap();
        }
    }

    let out = args.out.clone().unwrap_or_else(|| root.join("summary.csv"));
    std::fs::write(&out, &csv)?;
    println!(
        "summarized {included} run(s) across {} condition(s) → {}",
        groups.len(),
        out.display()
    );
    for (path, reason) in &excluded {
        println!("excluded: {} ({reason})", path.display());
    }
    Ok(())
}
