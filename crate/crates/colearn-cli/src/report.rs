//! Report file writers. Every run leaves a JSON report (verdict, metrics,
//! checks with their thresholds, resolved configuration) and a CSV of
//! per-seed metrics. The CSV holds no timing, so reruns of the same config
//! reproduce it byte for byte.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use colearn::experiments::ExperimentReport;
use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
pub struct ReportFile<'a> {
    pub schema_version: u32,
    /// True when the run died before producing results; `error` then says
    /// why and `report` is absent.
    pub incomplete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: ConfigEcho<'a>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<&'a ExperimentReport>,
}

/// The experiment and its fully resolved parameters, round-trippable into
/// a new config file.
#[derive(Serialize)]
pub struct ConfigEcho<'a> {
    pub experiment: &'a str,
    pub params: Value,
}

pub fn json_path(dir: &Path, experiment: &str) -> PathBuf {
    dir.join(format!("{experiment}.json"))
}

pub fn csv_path(dir: &Path, experiment: &str) -> PathBuf {
    dir.join(format!("{experiment}.csv"))
}

pub fn write_json(dir: &Path, experiment: &str, file: &ReportFile) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = json_path(dir, experiment);
    let mut text = serde_json::to_string_pretty(file).expect("reports serialize");
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

pub fn seed_metrics_csv(report: &ExperimentReport) -> String {
    let mut keys: BTreeSet<&str> = BTreeSet::new();
    for row in &report.seed_metrics {
        keys.extend(row.values.keys().map(String::as_str));
    }
    let mut out = String::from("seed");
    for k in &keys {
        out.push(',');
        out.push_str(k);
    }
    out.push('\n');
    for row in &report.seed_metrics {
        out.push_str(&row.seed.to_string());
        for k in &keys {
            out.push(',');
            if let Some(v) = row.values.get(*k) {
                out.push_str(&format!("{v}"));
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(dir: &Path, report: &ExperimentReport) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = csv_path(dir, &report.name);
    fs::write(&path, seed_metrics_csv(report))?;
    Ok(path)
}
