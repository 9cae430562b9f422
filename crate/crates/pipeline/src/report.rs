//! Report serialization: metric CSVs with per-method aggregates, and the
//! JSON manifest every command-line run writes alongside its outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{PipelineError, Result};
use crate::evaluate::MetricRow;

pub const CSV_HEADER: &str = "method,seed,mae,psnr,fa_mae_region,fa_mae_brain,ad_mae_region,md_mae_region,mae_region,psnr_region";

/// Metric column count (everything after method and seed).
pub const METRIC_COLUMNS: usize = 8;

/// Names of the metric columns in CSV order.
pub const METRIC_NAMES: [&str; METRIC_COLUMNS] = [
    "mae",
    "psnr",
    "fa_mae_region",
    "fa_mae_brain",
    "ad_mae_region",
    "md_mae_region",
    "mae_region",
    "psnr_region",
];

/// Format a metric value: Rust's shortest round-trip form, with non-finite
/// values written as the sentinel "inf" (the sign is kept for -inf).
pub fn fmt_metric(x: f64) -> String {
    if x.is_nan() {
        "inf".to_string()
    } else {
        // f64 Display already prints "inf"/"-inf" for infinities.
        format!("{x}")
    }
}

fn parse_metric(s: &str) -> Result<f64> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s
            .parse()
            .map_err(|_| PipelineError::BadConfig(format!("bad metric value '{s}'"))),
    }
}

impl MetricRow {
    pub fn metrics(&self) -> [f64; METRIC_COLUMNS] {
        [
            self.mae,
            self.psnr,
            self.fa_mae_region,
            self.fa_mae_brain,
            self.ad_mae_region,
            self.md_mae_region,
            self.mae_region,
            self.psnr_region,
        ]
    }

    pub fn to_csv_line(&self) -> String {
        let mut line = format!("{},{}", self.method, self.seed);
        for v in self.metrics() {
            line.push(',');
            line.push_str(&fmt_metric(v));
        }
        line
    }
}

/// A set of evaluation rows plus derived per-method aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

/// Mean and population standard deviation of each metric column over the
/// rows sharing a method label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: String,
    pub count: usize,
    pub mean: [f64; METRIC_COLUMNS],
    pub std: [f64; METRIC_COLUMNS],
}

impl MetricReport {
    pub fn new(rows: Vec<MetricRow>) -> Self {
        MetricReport { rows }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.to_csv_line());
            s.push('\n');
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| PipelineError::BadConfig("empty report CSV".into()))?;
        if header != CSV_HEADER {
            return Err(PipelineError::BadConfig(format!(
                "unexpected report header '{header}'"
            )));
        }
        let mut rows = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 2 + METRIC_COLUMNS {
                return Err(PipelineError::BadConfig(format!(
                    "bad report line '{line}'"
                )));
            }
            let seed = parts[1]
                .parse()
                .map_err(|_| PipelineError::BadConfig(format!("bad seed '{}'", parts[1])))?;
            let mut m = [0.0; METRIC_COLUMNS];
            for (slot, raw) in m.iter_mut().zip(&parts[2..]) {
                *slot = parse_metric(raw)?;
            }
            rows.push(MetricRow {
                method: parts[0].to_string(),
                seed,
                mae: m[0],
                psnr: m[1],
                fa_mae_region: m[2],
                fa_mae_brain: m[3],
                ad_mae_region: m[4],
                md_mae_region: m[5],
                mae_region: m[6],
                psnr_region: m[7],
            });
        }
        Ok(MetricReport { rows })
    }

    /// Per-method mean and population std, in first-appearance order.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut order: Vec<&str> = Vec::new();
        for row in &self.rows {
            if !order.contains(&row.method.as_str()) {
                order.push(&row.method);
            }
        }
        order
            .into_iter()
            .map(|method| {
                let values: Vec<[f64; METRIC_COLUMNS]> = self
                    .rows
                    .iter()
                    .filter(|r| r.method == method)
                    .map(|r| r.metrics())
                    .collect();
                let n = values.len() as f64;
                let mut mean = [0.0; METRIC_COLUMNS];
                let mut std = [0.0; METRIC_COLUMNS];
                for col in 0..METRIC_COLUMNS {
                    mean[col] = values.iter().map(|v| v[col]).sum::<f64>() / n;
                    let var = values
                        .iter()
                        .map(|v| {
                            let d = v[col] - mean[col];
                            d * d
                        })
                        .sum::<f64>()
                        / n;
                    std[col] = var.sqrt();
                }
                Aggregate {
                    method: method.to_string(),
                    count: values.len(),
                    mean,
                    std,
                }
            })
            .collect()
    }

    /// Aggregates as a CSV of method, count, then mean and std per column.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("method,count");
        for name in METRIC_NAMES {
            s.push_str(&format!(",{name}_mean,{name}_std"));
        }
        s.push('\n');
        for agg in self.aggregates() {
            s.push_str(&format!("{},{}", agg.method, agg.count));
            for col in 0..METRIC_COLUMNS {
                s.push_str(&format!(
                    ",{},{}",
                    fmt_metric(agg.mean[col]),
                    fmt_metric(agg.std[col])
                ));
            }
            s.push('\n');
        }
        s
    }
}

/// Record of one artifact a run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
}

/// The manifest each command-line run writes: what ran, with which resolved
/// configuration and seed, which files went in and came out, and how long it
/// took. The wall-clock field is informational and varies between reruns;
/// every other field is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<String>,
    pub outputs: Vec<OutputRecord>,
    pub wall_clock_seconds: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut s = String::with_capacity(64);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn write_string(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| PipelineError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::json(path, e))?;
    write_string(path, &(text + "\n"))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::json(path, e))
}

/// Collect output records (relative path + content hash) for manifest
/// writing; `base` is the run's output directory.
pub fn record_outputs(base: &Path, files: &[PathBuf]) -> Result<Vec<OutputRecord>> {
    let mut out = Vec::with_capacity(files.len());
    for f in files {
        let rel = f.strip_prefix(base).unwrap_or(f);
        out.push(OutputRecord {
            path: rel.to_string_lossy().into_owned(),
            sha256: sha256_file(f)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, seed: u64, base: f64) -> MetricRow {
        MetricRow {
            method: method.into(),
            seed,
            mae: base,
            psnr: 10.0 + base,
            fa_mae_region: 2.0 * base,
            fa_mae_brain: base / 2.0,
            ad_mae_region: base / 3.0,
            md_mae_region: base / 4.0,
            mae_region: base * 1.5,
            psnr_region: 9.0 + base,
        }
    }

    #[test]
    fn csv_round_trip_preserves_rows_exactly() {
        let report = MetricReport::new(vec![
            row("full", 1, 0.125),
            row("cropped", 1, 0.7071067811865476),
            MetricRow {
                psnr: f64::INFINITY,
                ..row("identity", 2, 0.0)
            },
        ]);
        let text = report.to_csv();
        let parsed = MetricReport::parse_csv(&text).unwrap();
        assert_eq!(parsed, report);
        assert!(text.contains(",inf"));
        assert!(text.starts_with(CSV_HEADER));
    }

    #[test]
    fn aggregates_match_two_pass_mean_and_population_std() {
        let report = MetricReport::new(vec![
            row("full", 1, 0.1),
            row("full", 2, 0.3),
            row("full", 3, 0.2),
            row("cropped", 1, 1.0),
        ]);
        let aggs = report.aggregates();
        assert_eq!(aggs.len(), 2);
        let full = &aggs[0];
        assert_eq!(full.method, "full");
        assert_eq!(full.count, 3);
        // mae values 0.1, 0.3, 0.2: mean 0.2, population variance
        // ((0.01)+(0.01)+0)/3.
        assert!((full.mean[0] - 0.2).abs() < 1e-15);
        let var: f64 = [0.1f64, 0.3, 0.2]
            .iter()
            .map(|v| (v - 0.2) * (v - 0.2))
            .sum::<f64>()
            / 3.0;
        assert!((full.std[0] - var.sqrt()).abs() < 1e-15);
        let cropped = &aggs[1];
        assert_eq!(cropped.count, 1);
        assert_eq!(cropped.std[0], 0.0);
    }

    #[test]
    fn summary_csv_contains_all_columns() {
        let report = MetricReport::new(vec![row("full", 1, 0.1)]);
        let s = report.summary_csv();
        let header = s.lines().next().unwrap();
        assert_eq!(header.split(',').count(), 2 + 2 * METRIC_COLUMNS);
        for name in METRIC_NAMES {
            assert!(header.contains(name));
        }
    }

    #[test]
    fn sha256_matches_known_vector() {
        // SHA-256 of the empty string and of "abc" are published constants.
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_json_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let artifact = dir.path().join("report.csv");
        std::fs::write(&artifact, "hello").unwrap();
        let manifest = RunManifest {
            subcommand: "evaluate".into(),
            config: serde_json::json!({"seed": 1}),
            seed: 1,
            inputs: vec!["gt.nii".into()],
            outputs: record_outputs(dir.path(), &[artifact]).unwrap(),
            wall_clock_seconds: 0.25,
        };
        let path = dir.path().join("manifest.json");
        write_json(&path, &manifest).unwrap();
        let back: RunManifest = read_json(&path).unwrap();
        assert_eq!(back, manifest);
        assert_eq!(back.outputs[0].path, "report.csv");
        assert_eq!(back.outputs[0].sha256, sha256_hex(b"hello"));
    }
}
