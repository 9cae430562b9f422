//! Ablation harness: train every architecture variant under each seed and
//! report them next to the un-inpainted "cropped" reference.

use std::path::{Path, PathBuf};

use dti_nn::ModelVariant;

use crate::config::TrainConfig;
use crate::dataset::Dataset;
use crate::error::Result;
use crate::evaluate::cropped_rows;
use crate::report::{write_string, MetricReport};
use crate::train::{train_and_evaluate, write_loss_curve};

#[derive(Debug)]
pub struct AblationOutcome {
    /// One report per seed, in seed order: a "cropped" row per test subject
    /// followed by one row per variant and test subject.
    pub per_seed: Vec<(u64, MetricReport)>,
    /// Files written, relative to the output directory.
    pub files: Vec<PathBuf>,
}

/// Run the ablation: for each seed, evaluate the cropped reference and train
/// all four variants with that seed. Writes `ablation_seed{S}.csv` per seed,
/// the concatenated `ablation_all.csv`, a per-method summary, and per-run
/// loss curves.
pub fn run_ablation(
    dataset: &Dataset,
    base: &TrainConfig,
    seeds: &[u64],
    out_dir: &Path,
) -> Result<AblationOutcome> {
    let mut per_seed = Vec::with_capacity(seeds.len());
    let mut files = Vec::new();
    let mut all_rows = Vec::new();
    for &seed in seeds {
        let mut rows = cropped_rows(dataset, seed)?;
        for variant in ModelVariant::ALL {
            let mut cfg = base.clone();
            cfg.seed = seed;
            cfg.variant = variant;
            log::info!("ablation: training {} with seed {seed}", variant.name());
            let (outcome, vrows) = train_and_evaluate(dataset, &cfg)?;
            let curve_path = out_dir.join(format!("loss_seed{}_{}.csv", seed, variant.name()));
            write_loss_curve(&curve_path, &outcome.loss_curve)?;
            files.push(curve_path);
            rows.extend(vrows);
        }
        let report = MetricReport::new(rows);
        let path = out_dir.join(format!("ablation_seed{seed}.csv"));
        write_string(&path, &report.to_csv())?;
        files.push(path);
        all_rows.extend(report.rows.clone());
        per_seed.push((seed, report));
    }
    let combined = MetricReport::new(all_rows);
    let all_path = out_dir.join("ablation_all.csv");
    write_string(&all_path, &combined.to_csv())?;
    files.push(all_path);
    let summary_path = out_dir.join("ablation_summary.csv");
    write_string(&summary_path, &combined.summary_csv())?;
    files.push(summary_path);
    Ok(AblationOutcome { per_seed, files })
}
