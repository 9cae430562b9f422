//! Subcommand definitions, configuration resolution, and dispatch for the
//! `dti-inpaint` binary.
//!
//! Settings resolve in three layers: built-in defaults, then a JSON config
//! file (`--config`), then command-line flags. Every run writes a
//! `manifest.json` into the output directory recording the resolved
//! configuration, the input paths, and a SHA-256 digest of every other file
//! produced, so reruns can be compared byte for byte. All randomness is
//! derived from `--seed`; worker threads (`--threads`) never change results.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use dti_core::nifti::{
    meta_path, read_disruption_mask, read_mask, read_tensor_field, write_disruption_mask,
    write_mask, write_tensor_field, write_volume, VolumeRef,
};
use dti_core::{
    crop_superior, generate_phantom, render_rgb_slice, scalar_metrics, PhantomSpec, Plane,
};
use dti_nn::{load_checkpoint, save_checkpoint, ModelConfig, ModelVariant};
use dti_pipeline::config::{parse_dims, PatchProfile, TrainConfig};
use dti_pipeline::dataset::{build_dataset, jitter_spec, Dataset};
use dti_pipeline::evaluate::{cropped_rows, evaluate};
use dti_pipeline::infer::{infer_volume, InferSettings, ModelPredictor};
use dti_pipeline::report::{
    read_json, record_outputs, write_json, write_string, MetricReport, RunManifest,
};
use dti_pipeline::sweep::{budget_label, parse_budgets, run_efficiency_sweep};
use dti_pipeline::train::{train, write_loss_curve};
use dti_pipeline::{PipelineError, Result};

#[derive(Parser, Debug)]
#[command(
    name = "dti-inpaint",
    version,
    about = "Synthesize, disrupt, inpaint, and evaluate volumetric diffusion tensor data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic tensor phantoms (ground truth + brain mask)
    Phantom(PhantomArgs),
    /// Remove the superior fraction of brain-bearing axial slices
    Crop(CropArgs),
    /// FA/MD/AD maps and direction-encoded color slices for a tensor field
    Metrics(MetricsArgs),
    /// Train an inpainting model on a synthetic cohort
    Train(TrainArgs),
    /// Inpaint a disrupted volume with a trained checkpoint
    Infer(InferArgs),
    /// Score a prediction against ground truth over brain and disrupted region
    Evaluate(EvaluateArgs),
    /// Train and evaluate every model variant across seeds
    Ablation(AblationArgs),
    /// Budget-restricted training sweep at two patch scales
    Sweep(SweepArgs),
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// JSON config file; command-line flags override its entries
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed for every random choice in the run
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; any value produces the same metrics
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory, created if missing
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

/// Synthetic-cohort shape shared by train/ablation/sweep.
#[derive(Args, Debug, Clone)]
struct CohortArgs {
    /// Phantom dimensions AxBxC (cohort commands default to 32x32x32)
    #[arg(long, value_name = "AxBxC")]
    dims: Option<String>,
    /// Training subjects in the cohort
    #[arg(long, value_name = "N")]
    train_subjects: Option<usize>,
    /// Held-out test subjects in the cohort
    #[arg(long, value_name = "N")]
    test_subjects: Option<usize>,
    /// Fraction of brain-bearing axial slices to remove
    #[arg(long)]
    fraction: Option<f64>,
}

/// Optimizer and patch knobs shared by train/ablation/sweep.
#[derive(Args, Debug, Clone)]
struct FitArgs {
    /// Training epochs
    #[arg(long)]
    epochs: Option<usize>,
    /// Adam learning rate
    #[arg(long)]
    lr: Option<f64>,
    /// Patches per optimizer step
    #[arg(long)]
    batch: Option<usize>,
    /// Patch profile: 64x64x32, 64x64x64, tiny, or AxBxC[/DxExF]
    #[arg(long, value_name = "PROFILE")]
    patch: Option<String>,
    /// Restrict training to the N valid axial slices nearest the disruption
    #[arg(long, value_name = "N")]
    budget: Option<usize>,
}

#[derive(Args, Debug)]
struct PhantomArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of subjects; subject 0 is the base recipe, later ones jitter it
    #[arg(long, value_name = "N")]
    count: Option<usize>,
    /// Phantom dimensions AxBxC (defaults to the built-in 48x56x48 recipe)
    #[arg(long, value_name = "AxBxC")]
    dims: Option<String>,
}

#[derive(Args, Debug)]
struct CropArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Ground-truth tensor field (.nii)
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Brain mask (.nii)
    #[arg(long, value_name = "PATH")]
    mask: PathBuf,
    /// Fraction of brain-bearing axial slices to remove
    #[arg(long)]
    fraction: Option<f64>,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Tensor field to map (.nii)
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Brain mask (.nii)
    #[arg(long, value_name = "PATH")]
    mask: PathBuf,
    /// Axial slice for the color image (defaults to the middle brain slice)
    #[arg(long, value_name = "Z")]
    slice: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    cohort: CohortArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// Model variant to train
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Checkpoint manifest written by `train` (.json)
    #[arg(long, value_name = "PATH")]
    checkpoint: PathBuf,
    /// Disrupted tensor field (.nii)
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Brain mask (.nii)
    #[arg(long, value_name = "PATH")]
    mask: PathBuf,
    /// Disruption mask (.nii with sidecar)
    #[arg(long, value_name = "PATH")]
    dmask: PathBuf,
    /// Patch profile for sliding-window inference
    #[arg(long, value_name = "PROFILE")]
    patch: Option<String>,
    /// Keep raw network output everywhere instead of compositing it into the
    /// input outside the disrupted region
    #[arg(long)]
    raw: bool,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Predicted tensor field (.nii)
    #[arg(long, value_name = "PATH")]
    pred: PathBuf,
    /// Ground-truth tensor field (.nii)
    #[arg(long, value_name = "PATH")]
    gt: PathBuf,
    /// Brain mask (.nii)
    #[arg(long, value_name = "PATH")]
    mask: PathBuf,
    /// Disruption mask (.nii with sidecar)
    #[arg(long, value_name = "PATH")]
    dmask: PathBuf,
    /// Method label for the report row
    #[arg(long, value_name = "NAME")]
    method: Option<String>,
}

#[derive(Args, Debug)]
struct AblationArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    cohort: CohortArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// Comma-separated seeds, one full run per seed
    #[arg(long, value_name = "S1,S2,...")]
    seeds: Option<String>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    cohort: CohortArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// Comma-separated slice budgets; `max` means unrestricted
    #[arg(long, value_name = "B1,B2,...,max")]
    budgets: Option<String>,
    /// Comma-separated patch profiles to sweep (default: 16x16x8 and 16x16x16)
    #[arg(long, value_name = "P1,P2")]
    profiles: Option<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum VariantArg {
    /// Plain encoder-decoder, single decoder, ordinary convolutions
    Baseline,
    /// Gated convolutions and tensor-wise decoders, no brain-aware masking
    Noba,
    /// Gated convolutions and brain-aware masking, single shared decoder
    Notw,
    /// Gated convolutions, brain-aware masking, and tensor-wise decoders
    Full,
}

impl From<VariantArg> for ModelVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Baseline => ModelVariant::Baseline,
            VariantArg::Noba => ModelVariant::NoBa,
            VariantArg::Notw => ModelVariant::NoTw,
            VariantArg::Full => ModelVariant::Full,
        }
    }
}

/// Optional overrides loaded from `--config`. Flags beat these; these beat
/// the built-in defaults.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    threads: Option<usize>,
    variant: Option<String>,
    patch: Option<String>,
    fraction: Option<f64>,
    budget: Option<usize>,
    epochs: Option<usize>,
    lr: Option<f64>,
    batch: Option<usize>,
    dims: Option<String>,
    train_subjects: Option<usize>,
    test_subjects: Option<usize>,
    count: Option<usize>,
    seeds: Option<Vec<u64>>,
    budgets: Option<String>,
    profiles: Option<String>,
    method: Option<String>,
    /// Network size: "tiny" (default) or "production" for the full-scale
    /// profile.
    model_profile: Option<String>,
    /// Complete phantom recipe; when present it beats `dims` scaling.
    phantom: Option<PhantomSpec>,
}

/// What a subcommand hands back for manifest writing and the final stdout
/// summary.
struct RunOutput {
    seed: u64,
    config: serde_json::Value,
    inputs: Vec<String>,
    /// Absolute paths of every file written (manifest excluded).
    files: Vec<PathBuf>,
    note: String,
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap sends --help/--version to stdout (success) and usage
            // errors to stderr; mirror that in the exit code.
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    init_logging();
    match execute(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("DTI_INPAINT_LOG", "warn");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}

fn execute(cli: Cli) -> Result<()> {
    let common = command_common(&cli.command).clone();
    let fc: FileConfig = match &common.config {
        Some(path) => read_json(path)?,
        None => FileConfig::default(),
    };
    let threads = common.threads.or(fc.threads).unwrap_or(1);
    if threads == 0 {
        return Err(PipelineError::BadConfig("--threads must be >= 1".into()));
    }
    // The global pool can only be installed once per process; later calls
    // (e.g. library callers reusing `run`) keep the existing pool.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();

    fs::create_dir_all(&common.out).map_err(|e| PipelineError::io(&common.out, e))?;
    let started = Instant::now();
    let name = command_name(&cli.command);
    let output = match &cli.command {
        Command::Phantom(a) => cmd_phantom(a, &fc)?,
        Command::Crop(a) => cmd_crop(a, &fc)?,
        Command::Metrics(a) => cmd_metrics(a, &fc)?,
        Command::Train(a) => cmd_train(a, &fc)?,
        Command::Infer(a) => cmd_infer(a, &fc)?,
        Command::Evaluate(a) => cmd_evaluate(a, &fc)?,
        Command::Ablation(a) => cmd_ablation(a, &fc)?,
        Command::Sweep(a) => cmd_sweep(a, &fc)?,
    };
    finish(name, &common.out, started, output)
}

fn command_common(cmd: &Command) -> &CommonArgs {
    match cmd {
        Command::Phantom(a) => &a.common,
        Command::Crop(a) => &a.common,
        Command::Metrics(a) => &a.common,
        Command::Train(a) => &a.common,
        Command::Infer(a) => &a.common,
        Command::Evaluate(a) => &a.common,
        Command::Ablation(a) => &a.common,
        Command::Sweep(a) => &a.common,
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Phantom(_) => "phantom",
        Command::Crop(_) => "crop",
        Command::Metrics(_) => "metrics",
        Command::Train(_) => "train",
        Command::Infer(_) => "infer",
        Command::Evaluate(_) => "evaluate",
        Command::Ablation(_) => "ablation",
        Command::Sweep(_) => "sweep",
    }
}

/// Record hashes, write `manifest.json`, and print the one-line summary.
/// Wall-clock time is informational only; every other manifest field is
/// deterministic for a fixed argv + seed.
fn finish(subcommand: &str, out_dir: &Path, started: Instant, output: RunOutput) -> Result<()> {
    let outputs = record_outputs(out_dir, &output.files)?;
    let manifest = RunManifest {
        subcommand: subcommand.to_string(),
        config: output.config,
        seed: output.seed,
        inputs: output.inputs,
        outputs,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    println!("{}", output.note);
    println!(
        "{subcommand}: wrote {} files + manifest.json under {}",
        output.files.len(),
        out_dir.display()
    );
    Ok(())
}

fn resolved_seed(common: &CommonArgs, fc: &FileConfig) -> u64 {
    common.seed.or(fc.seed).unwrap_or(42)
}

/// Base phantom recipe for cohort synthesis: a full recipe from the config
/// file wins, then `--dims` scaling of the built-in recipe, then `fallback`.
fn base_spec(
    dims_flag: &Option<String>,
    fc: &FileConfig,
    fallback: [usize; 3],
) -> Result<(PhantomSpec, [usize; 3])> {
    if let Some(spec) = &fc.phantom {
        let dims = spec.dims;
        return Ok((spec.clone(), dims));
    }
    let dims = match dims_flag.as_ref().or(fc.dims.as_ref()) {
        Some(s) => parse_dims(s)?,
        None => fallback,
    };
    Ok((dti_pipeline::dataset::scaled_default_spec(dims), dims))
}

fn parse_profile(flag: &Option<String>, fc: &FileConfig) -> Result<PatchProfile> {
    match flag.as_ref().or(fc.patch.as_ref()) {
        Some(s) => PatchProfile::parse(s),
        None => Ok(PatchProfile::tiny()),
    }
}

fn model_config(fc: &FileConfig) -> Result<ModelConfig> {
    match fc.model_profile.as_deref() {
        None | Some("tiny") => Ok(ModelConfig::tiny()),
        Some("production") => Ok(ModelConfig::default_profile()),
        Some(other) => Err(PipelineError::BadConfig(format!(
            "unknown model_profile '{other}': expected tiny or production"
        ))),
    }
}

fn parse_variant_name(s: &str) -> Result<ModelVariant> {
    ModelVariant::ALL
        .iter()
        .copied()
        .find(|v| v.name() == s)
        .ok_or_else(|| PipelineError::BadConfig(format!("unknown variant '{s}'")))
}

/// Assemble a TrainConfig from flags, file config, and defaults. The cohort
/// defaults (32x32x32 phantoms, 3 train / 1 test) keep single-core training
/// runs comfortably inside half an hour.
struct CohortPlan {
    spec: PhantomSpec,
    dims: [usize; 3],
    train_subjects: usize,
    test_subjects: usize,
    fraction: f64,
}

fn cohort_plan(cohort: &CohortArgs, fc: &FileConfig) -> Result<CohortPlan> {
    let (spec, dims) = base_spec(&cohort.dims, fc, [32, 32, 32])?;
    Ok(CohortPlan {
        spec,
        dims,
        train_subjects: cohort.train_subjects.or(fc.train_subjects).unwrap_or(3),
        test_subjects: cohort.test_subjects.or(fc.test_subjects).unwrap_or(1),
        fraction: cohort.fraction.or(fc.fraction).unwrap_or(0.10),
    })
}

fn fit_config(
    fit: &FitArgs,
    fc: &FileConfig,
    seed: u64,
    variant: ModelVariant,
) -> Result<TrainConfig> {
    Ok(TrainConfig {
        epochs: fit.epochs.or(fc.epochs).unwrap_or(50),
        lr: fit.lr.or(fc.lr).unwrap_or(1e-3),
        batch: fit.batch.or(fc.batch).unwrap_or(4),
        profile: parse_profile(&fit.patch, fc)?,
        seed,
        budget: fit.budget.or(fc.budget),
        variant,
        model: model_config(fc)?,
    })
}

fn build_cohort(plan: &CohortPlan, seed: u64) -> Result<Dataset> {
    build_dataset(
        &plan.spec,
        plan.train_subjects,
        plan.test_subjects,
        plan.fraction,
        seed,
    )
}

fn fit_config_json(plan: &CohortPlan, cfg: &TrainConfig) -> serde_json::Value {
    json!({
        "dims": plan.dims,
        "train_subjects": plan.train_subjects,
        "test_subjects": plan.test_subjects,
        "fraction": plan.fraction,
        "epochs": cfg.epochs,
        "lr": cfg.lr,
        "batch": cfg.batch,
        "patch": cfg.profile.name,
        "budget": cfg.budget.map(budget_label),
        "variant": cfg.variant.name(),
        "model": cfg.model,
    })
}

// --- subcommands -----------------------------------------------------------

fn cmd_phantom(args: &PhantomArgs, fc: &FileConfig) -> Result<RunOutput> {
    let out = &args.common.out;
    let count = args.count.or(fc.count).unwrap_or(1);
    if count == 0 {
        return Err(PipelineError::BadConfig("--count must be >= 1".into()));
    }
    // Default to the library's full-size recipe so `phantom` with no flags
    // reproduces the reference volume exactly.
    let (mut base, dims) = base_spec(&args.dims, fc, PhantomSpec::default().dims)?;
    if let Some(seed) = args.common.seed.or(fc.seed) {
        base.seed = seed;
    }
    let seed = base.seed;

    let mut files = Vec::new();
    let mut brain0 = 0usize;
    for i in 0..count {
        let spec = if i == 0 {
            base.clone()
        } else {
            jitter_spec(&base, seed, (i - 1) as u64)
        };
        let (gt, mask) = generate_phantom(&spec)?;
        if i == 0 {
            brain0 = mask.data.iter().filter(|&&v| v != 0).count();
        }
        let gt_path = out.join(format!("subject{i}_gt.nii"));
        write_tensor_field(&gt, &gt_path)?;
        let mask_path = out.join(format!("subject{i}_mask.nii"));
        write_mask(&mask, spec.voxel_size, &mask_path)?;
        let spec_path = out.join(format!("subject{i}_spec.json"));
        write_json(&spec_path, &spec)?;
        files.extend([gt_path.clone(), meta_path(&gt_path), mask_path, spec_path]);
    }
    Ok(RunOutput {
        seed,
        config: json!({ "count": count, "dims": dims, "spec": base }),
        inputs: Vec::new(),
        files,
        note: format!(
            "phantom: {count} subject(s) at {}x{}x{}, {brain0} brain voxels in subject 0",
            dims[0], dims[1], dims[2]
        ),
    })
}

fn cmd_crop(args: &CropArgs, fc: &FileConfig) -> Result<RunOutput> {
    let out = &args.common.out;
    let fraction = args.fraction.or(fc.fraction).unwrap_or(0.10);
    let field = read_tensor_field(&args.input)?;
    let mask = read_mask(&args.mask)?;
    let (disrupted, dmask) = crop_superior(&field, &mask, fraction)?;

    let dis_path = out.join("disrupted.nii");
    write_tensor_field(&disrupted, &dis_path)?;
    let dmask_path = out.join("dmask.nii");
    write_disruption_mask(&dmask, field.voxel_size, &dmask_path)?;
    let files = vec![
        dis_path.clone(),
        meta_path(&dis_path),
        dmask_path.clone(),
        meta_path(&dmask_path),
    ];
    Ok(RunOutput {
        seed: resolved_seed(&args.common, fc),
        config: json!({
            "fraction": fraction,
            "cropped_slices": dmask.slices.len(),
            "slice_indices": dmask.slices,
        }),
        inputs: vec![display(&args.input), display(&args.mask)],
        files,
        note: format!(
            "crop: removed {} superior slice(s) {:?} at fraction {fraction}",
            dmask.slices.len(),
            dmask.slices
        ),
    })
}

fn cmd_metrics(args: &MetricsArgs, fc: &FileConfig) -> Result<RunOutput> {
    let out = &args.common.out;
    let field = read_tensor_field(&args.input)?;
    let mask = read_mask(&args.mask)?;
    let maps = scalar_metrics(&field, &mask)?;

    let brain_slices = mask.brain_slices();
    if brain_slices.is_empty() {
        return Err(PipelineError::BadConfig("brain mask is empty".into()));
    }
    let axial = args.slice.unwrap_or(brain_slices[brain_slices.len() / 2]);
    let coronal = field.dims[1] / 2;
    let sagittal = field.dims[0] / 2;

    let mut files = Vec::new();
    for (name, vol) in [("fa", &maps.fa), ("md", &maps.md), ("ad", &maps.ad)] {
        let path = out.join(format!("{name}.nii"));
        write_volume(VolumeRef::Scalar(vol), &path)?;
        files.push(path);
    }
    for (name, plane, index) in [
        ("rgb_axial", Plane::Axial, axial),
        ("rgb_coronal", Plane::Coronal, coronal),
        ("rgb_sagittal", Plane::Sagittal, sagittal),
    ] {
        let img = render_rgb_slice(&field, &mask, plane, index)?;
        let path = out.join(format!("{name}.ppm"));
        fs::write(&path, img.to_ppm()).map_err(|e| PipelineError::io(&path, e))?;
        files.push(path);
    }
    Ok(RunOutput {
        seed: resolved_seed(&args.common, fc),
        config: json!({
            "axial_slice": axial,
            "coronal_slice": coronal,
            "sagittal_slice": sagittal,
            "negative_eigenvalue_voxels": maps.qc.negative_eigenvalue_voxels,
            "brain_voxels": maps.qc.brain_voxels,
        }),
        inputs: vec![display(&args.input), display(&args.mask)],
        files,
        note: format!(
            "metrics: FA/MD/AD + RGB slices (axial z={axial}); {} of {} brain voxels had a negative eigenvalue",
            maps.qc.negative_eigenvalue_voxels, maps.qc.brain_voxels
        ),
    })
}

fn cmd_train(args: &TrainArgs, fc: &FileConfig) -> Result<RunOutput> {
    let out = &args.common.out;
    let seed = resolved_seed(&args.common, fc);
    let variant = match args.variant {
        Some(v) => v.into(),
        None => match &fc.variant {
            Some(s) => parse_variant_name(s)?,
            None => ModelVariant::Full,
        },
    };
    let plan = cohort_plan(&args.cohort, fc)?;
    let cfg = fit_config(&args.fit, fc, seed, variant)?;
    let dataset = build_cohort(&plan, seed)?;

    let outcome = train(&dataset, &cfg)?;

    let mut files = Vec::new();
    let ck_path = out.join("checkpoint.json");
    save_checkpoint(&outcome.model, Some(&outcome.normalization), &ck_path)?;
    files.extend([ck_path.clone(), ck_path.with_extension("bin")]);

    let loss_path = out.join("loss.csv");
    write_loss_curve(&loss_path, &outcome.loss_curve)?;
    files.push(loss_path);

    // Score the cropped input as the reference, then the trained model's
    // composite inpainting, on every held-out subject.
    let mut rows = cropped_rows(&dataset, seed)?;
    let settings = InferSettings::new(cfg.profile.clone());
    let predictor = ModelPredictor {
        model: &outcome.model,
    };
    for subject in &dataset.test {
        let pred = infer_volume(
            &predictor,
            &subject.disrupted,
            &subject.mask,
            &subject.dmask,
            &outcome.normalization,
            &settings,
        )?;
        let path = out.join(format!("{}_inpainted.nii", subject.name));
        write_tensor_field(&pred, &path)?;
        files.extend([path.clone(), meta_path(&path)]);
        rows.push(evaluate(
            cfg.variant.name(),
            seed,
            &pred,
            &subject.gt,
            &subject.mask,
            &subject.dmask,
        )?);
    }
    let report = MetricReport::new(rows);
    let report_path = out.join("report.csv");
    write_string(&report_path, &report.to_csv())?;
    let summary_path = out.join("report_summary.csv");
    write_string(&summary_path, &report.summary_csv())?;
    files.extend([report_path, summary_path]);

    let final_loss = outcome
        .loss_curve
        .last()
        .map(|&(_, l)| l)
        .unwrap_or(f64::NAN);
    let mut config = fit_config_json(&plan, &cfg);
    config["patches_per_epoch"] = json!(outcome.patches_per_epoch);
    config["effective_budgets"] = json!(outcome.effective_budgets);
    Ok(RunOutput {
        seed,
        config,
        inputs: Vec::new(),
        files,
        note: format!(
            "train[{}]: {} epochs over {} patches/epoch, final mean loss {:.6}",
            cfg.variant.name(),
            cfg.epochs,
            outcome.patches_per_epoch,
            final_loss
        ),
    })
}

fn cmd_infer(args: &InferArgs, fc: &FileConfig) -> Result<RunOutput> {
    let out = &args.common.out;
    let loaded = load_checkpoint(&args.checkpoint)?;
    let norm = loaded.normalization.ok_or_else(|| {
        PipelineError::BadConfig(format!(
            "checkpoint {} carries no normalization statistics; retrain or supply one saved by `train`",
            args.checkpoint.display()
        ))
    })?;
    let disrupted = read_tensor_field(&args.input)?;
    let mask = read_mask(&args.mask)?;
    let dmask = read_disruption_mask(&args.dmask)?;
    let profile = parse_profile(&args.patch, fc)?;
    let settings = InferSettings {
        profile: profile.clone(),
        composite: !args.raw,
    };

    let predictor = ModelPredictor {
        model: &loaded.model,
    };
    let pred = infer_volume(&predictor, &disrupted, &mask, &dmask, &norm, &settings)?;
    let pred_path = out.join("inpainted.nii");
    write_tensor_field(&pred, &pred_path)?;

    Ok(RunOutput {
        seed: resolved_seed(&args.common, fc),
        config: json!({
            "variant": loaded.model.variant.name(),
            "patch": profile.name,
            "composite": !args.raw,
        }),
        inputs: vec![
            display(&args.checkpoint),
            display(&args.input),
            display(&args.mask),
            display(&args.dmask),
        ],
        files: vec![pred_path.clone(), meta_path(&pred_path)],
        note: format!(
            "infer[{}]: inpainted {} disrupted slice(s) with patch profile {}",
            loaded.model.variant.name(),
            dmask.slices.len(),
            profile.name
        ),
    })
}

fn cmd_evaluate(args: &EvaluateArgs, fc: &FileConfig) -> Result<RunOutput> {
    let out = &args.common.out;
    let seed = resolved_seed(&args.common, fc);
    let method = args
        .method
        .clone()
        .or_else(|| fc.method.clone())
        .unwrap_or_else(|| "prediction".into());
    let pred = read_tensor_field(&args.pred)?;
    let gt = read_tensor_field(&args.gt)?;
    let mask = read_mask(&args.mask)?;
    let dmask = read_disruption_mask(&args.dmask)?;

    let row = evaluate(method.clone(), seed, &pred, &gt, &mask, &dmask)?;
    let note = format!(
        "evaluate[{method}]: mae {}, psnr {}, region FA mae {}, brain FA mae {}",
        row.mae, row.psnr, row.fa_mae_region, row.fa_mae_brain
    );
    let report = MetricReport::new(vec![row]);
    let report_path = out.join("report.csv");
    write_string(&report_path, &report.to_csv())?;

    Ok(RunOutput {
        seed,
        config: json!({ "method": method }),
        inputs: vec![
            display(&args.pred),
            display(&args.gt),
            display(&args.mask),
            display(&args.dmask),
        ],
        files: vec![report_path],
        note,
    })
}

fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<u64>()
                .map_err(|_| PipelineError::BadConfig(format!("bad seed '{}'", tok.trim())))
        })
        .collect()
}

fn cmd_ablation(args: &AblationArgs, fc: &FileConfig) -> Result<RunOutput> {
    let out = &args.common.out;
    let seed = resolved_seed(&args.common, fc);
    let seeds = match &args.seeds {
        Some(s) => parse_seed_list(s)?,
        None => fc.seeds.clone().unwrap_or_else(|| vec![1, 2, 3]),
    };
    if seeds.is_empty() {
        return Err(PipelineError::BadConfig(
            "--seeds must name at least one seed".into(),
        ));
    }
    let plan = cohort_plan(&args.cohort, fc)?;
    // Per-seed runs override the variant and seed; the base carries the rest.
    let cfg = fit_config(&args.fit, fc, seed, ModelVariant::Full)?;
    let dataset = build_cohort(&plan, seed)?;

    let outcome = dti_pipeline::ablation::run_ablation(&dataset, &cfg, &seeds, out)?;
    let files: Vec<PathBuf> = outcome.files.iter().map(|f| out.join(f)).collect();

    let methods: Vec<String> = outcome
        .per_seed
        .first()
        .map(|(_, report)| {
            report
                .aggregates()
                .iter()
                .map(|a| a.method.clone())
                .collect()
        })
        .unwrap_or_default();
    let mut config = fit_config_json(&plan, &cfg);
    config["seeds"] = json!(seeds);
    Ok(RunOutput {
        seed,
        config,
        inputs: Vec::new(),
        files,
        note: format!("ablation: {} seed(s) x methods {:?}", seeds.len(), methods),
    })
}

fn cmd_sweep(args: &SweepArgs, fc: &FileConfig) -> Result<RunOutput> {
    let out = &args.common.out;
    let seed = resolved_seed(&args.common, fc);
    let budgets = match args.budgets.as_ref().or(fc.budgets.as_ref()) {
        Some(s) => parse_budgets(s)?,
        None => parse_budgets("8,12,16,max")?,
    };
    let profiles: Vec<PatchProfile> = match args.profiles.as_ref().or(fc.profiles.as_ref()) {
        Some(s) => s
            .split(',')
            .map(|tok| PatchProfile::parse(tok.trim()))
            .collect::<Result<_>>()?,
        None => PatchProfile::desk_sweep_profiles(),
    };
    let plan = cohort_plan(&args.cohort, fc)?;
    let cfg = fit_config(&args.fit, fc, seed, ModelVariant::Full)?;
    let dataset = build_cohort(&plan, seed)?;

    let outcome = run_efficiency_sweep(&dataset, &cfg, &budgets, &profiles, out)?;
    let files: Vec<PathBuf> = outcome.files.iter().map(|f| out.join(f)).collect();

    // The restoration-vs-budget trend is reported, never asserted: tiny
    // cohorts can legitimately be non-monotone.
    let mut trend_lines = Vec::new();
    for series in &outcome.series {
        trend_lines.push(format!(
            "sweep[{}]: {} budgets; region FA mae nonincreasing with budget: {}; mae nonincreasing: {}",
            series.profile,
            series.budgets.len(),
            series.fa_region_monotone_nonincreasing,
            series.mae_monotone_nonincreasing
        ));
    }
    let mut config = fit_config_json(&plan, &cfg);
    config["budgets"] = json!(budgets.iter().map(|&b| budget_label(b)).collect::<Vec<_>>());
    config["profiles"] = json!(profiles.iter().map(|p| p.name.clone()).collect::<Vec<_>>());
    Ok(RunOutput {
        seed,
        config,
        inputs: Vec::new(),
        files,
        note: trend_lines.join("\n"),
    })
}

fn display(path: &Path) -> String {
    path.display().to_string()
}
