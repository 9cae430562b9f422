//! Valid-slice efficiency sweep: train the same variant under shrinking
//! training budgets, for each patch geometry, and report the per-budget
//! metric series. Trends are reported, never asserted: how much nearby
//! anatomy training needs is an empirical question.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{PatchProfile, TrainConfig};
use crate::dataset::Dataset;
use crate::error::{PipelineError, Result};
use crate::evaluate::MetricRow;
use crate::report::{write_json, write_string, CSV_HEADER};
use crate::train::train_and_evaluate;

/// Budget value standing for "all available valid slices".
pub const BUDGET_MAX: usize = usize::MAX;

/// One trained point of the sweep. `row` averages over test subjects when
/// there are several (the desk cohort has one).
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub profile: String,
    pub requested_budget: usize,
    /// Smallest effective budget over the training subjects after clamping.
    pub effective_budget: usize,
    pub clamped: bool,
    pub row: MetricRow,
}

/// Per-profile series written to the JSON manifest. The monotone flags are
/// descriptive output for the reader, computed over budgets in ascending
/// order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSeries {
    pub profile: String,
    pub budgets: Vec<usize>,
    pub effective_budgets: Vec<usize>,
    pub mae: Vec<f64>,
    pub fa_mae_region: Vec<f64>,
    pub fa_mae_brain: Vec<f64>,
    pub fa_region_monotone_nonincreasing: bool,
    pub mae_monotone_nonincreasing: bool,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub points: Vec<SweepPoint>,
    pub series: Vec<SweepSeries>,
    pub files: Vec<PathBuf>,
}

fn mean_of_rows(rows: &[MetricRow]) -> MetricRow {
    let n = rows.len() as f64;
    let mut mean = rows[0].clone();
    let sums = rows.iter().fold([0.0; 8], |mut acc, r| {
        for (a, v) in acc.iter_mut().zip(r.metrics()) {
            *a += v;
        }
        acc
    });
    let m: Vec<f64> = sums.iter().map(|s| s / n).collect();
    mean.mae = m[0];
    mean.psnr = m[1];
    mean.fa_mae_region = m[2];
    mean.fa_mae_brain = m[3];
    mean.ad_mae_region = m[4];
    mean.md_mae_region = m[5];
    mean.mae_region = m[6];
    mean.psnr_region = m[7];
    mean
}

/// True when `values`, visited in ascending order of `keys`, never increase.
fn monotone_nonincreasing(keys: &[usize], values: &[f64]) -> bool {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by_key(|&i| keys[i]);
    idx.windows(2).all(|w| values[w[1]] <= values[w[0]])
}

/// Run the sweep over every (profile, budget) pair. Writes one
/// `sweep_{profile}.csv` per profile (budget columns plus the metric
/// columns) and a `sweep_series.json` manifest holding the series and the
/// reported trend flags.
pub fn run_efficiency_sweep(
    dataset: &Dataset,
    base: &TrainConfig,
    budgets: &[usize],
    profiles: &[PatchProfile],
    out_dir: &Path,
) -> Result<SweepOutcome> {
    if budgets.is_empty() || profiles.is_empty() {
        return Err(PipelineError::BadConfig(
            "sweep needs at least one budget and profile".into(),
        ));
    }
    let mut points = Vec::new();
    let mut series = Vec::new();
    let mut files = Vec::new();
    for profile in profiles {
        let mut csv = format!(
            "profile,budget,effective_budget,clamped,{}\n",
            CSV_HEADER
        );
        let mut s = SweepSeries {
            profile: profile.name.clone(),
            budgets: budgets.to_vec(),
            effective_budgets: Vec::new(),
            mae: Vec::new(),
            fa_mae_region: Vec::new(),
            fa_mae_brain: Vec::new(),
            fa_region_monotone_nonincreasing: false,
            mae_monotone_nonincreasing: false,
        };
        for &budget in budgets {
            let mut cfg = base.clone();
            cfg.profile = profile.clone();
            cfg.budget = Some(budget);
            log::info!("sweep: profile {} budget {budget}", profile.name);
            let (outcome, rows) = train_and_evaluate(dataset, &cfg)?;
            let effective = outcome
                .effective_budgets
                .iter()
                .copied()
                .min()
                .unwrap_or(budget);
            let clamped = effective < budget;
            let row = mean_of_rows(&rows);
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                profile.name,
                budget_label(budget),
                effective,
                clamped,
                row.to_csv_line()
            ));
            s.effective_budgets.push(effective);
            s.mae.push(row.mae);
            s.fa_mae_region.push(row.fa_mae_region);
            s.fa_mae_brain.push(row.fa_mae_brain);
            points.push(SweepPoint {
                profile: profile.name.clone(),
                requested_budget: budget,
                effective_budget: effective,
                clamped,
                row,
            });
        }
        s.fa_region_monotone_nonincreasing =
            monotone_nonincreasing(&s.effective_budgets, &s.fa_mae_region);
        s.mae_monotone_nonincreasing = monotone_nonincreasing(&s.effective_budgets, &s.mae);
        let path = out_dir.join(format!("sweep_{}.csv", file_tag(&profile.name)));
        write_string(&path, &csv)?;
        files.push(path);
        series.push(s);
    }
    let manifest = out_dir.join("sweep_series.json");
    write_json(&manifest, &series)?;
    files.push(manifest);
    Ok(SweepOutcome {
        points,
        series,
        files,
    })
}

/// Profile name made filename-safe: the explicit-overlap form contains a
/// slash, which would otherwise name a subdirectory.
pub fn file_tag(name: &str) -> String {
    name.replace('/', "-")
}

/// Human-readable budget for CSVs: the max sentinel prints as "max".
pub fn budget_label(budget: usize) -> String {
    if budget == BUDGET_MAX {
        "max".to_string()
    } else {
        budget.to_string()
    }
}

/// Parse a budget list such as "4,8,12,max".
pub fn parse_budgets(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|tok| {
            let tok = tok.trim();
            if tok == "max" {
                Ok(BUDGET_MAX)
            } else {
                tok.parse::<usize>()
                    .map_err(|_| PipelineError::BadConfig(format!("bad budget '{tok}'")))
                    .and_then(|b| {
                        if b == 0 {
                            Err(PipelineError::BadConfig("budget must be >= 1".into()))
                        } else {
                            Ok(b)
                        }
                    })
            }
        })
        .collect()
}
