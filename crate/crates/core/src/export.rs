//! Result files. Output is a pure function of the inputs: identical
//! summaries give byte-identical files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::{CellFailure, DepotRanking, RunSummary};

pub const SUMMARIES_FILE: &str = "summaries.jsonl";
pub const METRICS_FILE: &str = "metrics.csv";
pub const ZONE_WAITS_FILE: &str = "zone_waits.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DEPOT_JSON_FILE: &str = "depot_search.json";
pub const DEPOT_CSV_FILE: &str = "depot_ranking.csv";

/// Marker written in tables for an undefined metric.
pub const MISSING: &str = "NA";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub scenario_hash: String,
    pub seeds: Vec<u64>,
    pub runs: usize,
    pub failures: Vec<CellFailure>,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(scenario_hash: &str, seeds: &[u64]) -> Self {
        Manifest {
            tool: "caas".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            scenario_hash: scenario_hash.into(),
            seeds: seeds.to_vec(),
            runs: 0,
            failures: Vec::new(),
            files: Vec::new(),
        }
    }
}

fn fmt_value(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => x.to_string(),
        _ => MISSING.to_string(),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| Error::InvalidConfig(format!("csv encoding failed: {e}"));
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.write_record(&r).map_err(wrap)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidConfig(format!("csv encoding failed: {e}")))
}

/// One line of JSON per summary.
pub fn summaries_jsonl(summaries: &[RunSummary]) -> String {
    let mut s = String::new();
    for r in summaries {
        s.push_str(&r.to_json());
        s.push('\n');
    }
    s
}

/// Tidy table: one metric observation per row.
pub fn metrics_csv(summaries: &[RunSummary]) -> Result<Vec<u8>> {
    csv_bytes(
        &["fleet_size", "policy", "seed", "metric", "value"],
        summaries.iter().flat_map(|r| {
            r.metrics.named_values().into_iter().map(move |(name, v)| {
                vec![
                    r.fleet_size.to_string(),
                    r.policy.to_string(),
                    r.seed.to_string(),
                    name.to_string(),
                    fmt_value(v),
                ]
            })
        }),
    )
}

/// Mean wait per zone and run.
pub fn zone_waits_csv(summaries: &[RunSummary], labels: &[String]) -> Result<Vec<u8>> {
    csv_bytes(
        &["fleet_size", "policy", "seed", "zone", "label", "mean_wait_min"],
        summaries.iter().flat_map(|r| {
            r.zone_mean_wait.iter().enumerate().map(move |(z, &w)| {
                vec![
                    r.fleet_size.to_string(),
                    r.policy.to_string(),
                    r.seed.to_string(),
                    z.to_string(),
                    labels.get(z).cloned().unwrap_or_default(),
                    fmt_value(w),
                ]
            })
        }),
    )
}

/// Writes the summaries, tables and manifest into `out_dir` and returns
/// the paths written. With no summaries only the manifest is written.
pub fn export(
    summaries: &[RunSummary],
    failures: &[CellFailure],
    scenario_hash: &str,
    seeds: &[u64],
    zone_labels: &[String],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut manifest = Manifest::new(scenario_hash, seeds);
    manifest.runs = summaries.len();
    manifest.failures = failures.to_vec();
    let mut written = Vec::new();
    if !summaries.is_empty() {
        let files: [(&str, Vec<u8>); 3] = [
            (SUMMARIES_FILE, summaries_jsonl(summaries).into_bytes()),
            (METRICS_FILE, metrics_csv(summaries)?),
            (ZONE_WAITS_FILE, zone_waits_csv(summaries, zone_labels)?),
        ];
        for (name, bytes) in files {
            let path = out_dir.join(name);
            write_file(&path, &bytes)?;
            manifest.files.push(name.to_string());
            written.push(path);
        }
    }
    let path = out_dir.join(MANIFEST_FILE);
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_file(&path, json.as_bytes())?;
    written.push(path);
    Ok(written)
}

/// Writes depot-search rankings as JSON plus a flat ranking table.
pub fn export_depot_search(rankings: &[DepotRanking], out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let json_path = out_dir.join(DEPOT_JSON_FILE);
    let mut json = serde_json::to_string_pretty(rankings).expect("rankings serialize");
    json.push('\n');
    write_file(&json_path, json.as_bytes())?;

    let csv = csv_bytes(
        &["policy", "fleet_size", "rank", "zone", "label", "mean_wait_min"],
        rankings.iter().flat_map(|r| {
            r.ranking.iter().enumerate().map(move |(k, c)| {
                vec![
                    r.policy.to_string(),
                    r.fleet_size.to_string(),
                    (k + 1).to_string(),
                    c.zone.0.to_string(),
                    c.label.clone().unwrap_or_default(),
                    fmt_value(c.mean_wait_min),
                ]
            })
        }),
    )?;
    let csv_path = out_dir.join(DEPOT_CSV_FILE);
    write_file(&csv_path, &csv)?;
    Ok(vec![json_path, csv_path])
}

/// Reads summaries back from a JSON-lines file.
pub fn read_summaries(path: &Path) -> Result<Vec<RunSummary>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(path, format!("line {}: {e}", i + 1))))
        .collect()
}
