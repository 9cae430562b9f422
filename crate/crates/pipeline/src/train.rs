//! Patch-based training: z-score normalization fitted on the training
//! ground truth, seed-shuffled epochs over retained patches, and Adam
//! updates from batch-averaged gradients.

use std::path::Path;

use dti_core::{
    extract_patches, restrict_valid_budget, zscore_apply, zscore_fit, CounterRng, Direction,
    NormalizationParams, TensorField, PATCH_CHANNELS,
};
use dti_nn::{masked_l1, AdamState, LayerTensor, Model};
use rayon::prelude::*;

use crate::config::TrainConfig;
use crate::dataset::Dataset;
use crate::error::{PipelineError, Result};

/// RNG stream offset for the per-epoch shuffle; disjoint from the subject
/// jitter streams and the model-init stream derived from the same seed.
const EPOCH_STREAM: u64 = 1_000;

/// One training example: the 7-channel input payload and the 6-channel
/// normalized ground-truth target at the same origin.
struct Example {
    payload: LayerTensor,
    target: Vec<f64>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub normalization: NormalizationParams,
    /// (epoch index, mean per-patch loss).
    pub loss_curve: Vec<(usize, f64)>,
    pub patches_per_epoch: usize,
    /// Effective valid-slice budget per training subject when a budget was
    /// requested (after clamping to the available slices).
    pub effective_budgets: Vec<usize>,
}

/// Forward + loss + backward for one example. The loss is the sum over the
/// six coefficients of the L1 mean inside the patch's brain mask channel.
fn example_step(model: &Model, ex: &Example) -> Result<(f64, Vec<f64>)> {
    let (out, tape) = model.forward_train(&ex.payload)?;
    let nvox = ex.payload.nvox();
    let mask = ex.payload.channel(6);
    let mut g_out = LayerTensor::zeros(6, ex.payload.dims);
    let mut loss = 0.0;
    for c in 0..6 {
        let (l, g) = masked_l1(out.channel(c), &ex.target[c * nvox..(c + 1) * nvox], mask)?;
        loss += l;
        g_out.channel_mut(c).copy_from_slice(&g);
    }
    let mut grads = model.zero_grads();
    model.backward(&tape, &g_out, &mut grads)?;
    Ok((loss, grads))
}

/// Train a model on the dataset's training subjects. Deterministic for a
/// fixed config: the parallel batch members are combined in patch order, so
/// the result is bit-identical for any thread count.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.train.is_empty() {
        return Err(PipelineError::BadConfig(
            "training requires at least one subject".into(),
        ));
    }

    let gts: Vec<&TensorField> = dataset.train.iter().map(|s| &s.gt).collect();
    let masks: Vec<_> = dataset.train.iter().map(|s| &s.mask).collect();
    let normalization = zscore_fit(&gts, &masks)?;

    let mut examples: Vec<Example> = Vec::new();
    let mut effective_budgets = Vec::new();
    for s in &dataset.train {
        let effective_mask = match cfg.budget {
            Some(b) => {
                let r = restrict_valid_budget(&s.mask, &s.dmask, b)?;
                if r.clamped {
                    log::warn!(
                        "{}: budget {} exceeds the {} available valid slices; clamped",
                        s.name,
                        crate::sweep::budget_label(r.requested_budget),
                        r.effective_budget
                    );
                }
                effective_budgets.push(r.effective_budget);
                r.effective_mask
            }
            None => s.mask.clone(),
        };
        let z_dis = zscore_apply(&s.disrupted, &normalization, Direction::Forward);
        let z_gt = zscore_apply(&s.gt, &normalization, Direction::Forward);
        let (grid, inputs) = extract_patches(
            &z_dis,
            &effective_mask,
            &s.dmask,
            cfg.profile.patch,
            cfg.profile.overlap,
        )?;
        let (_, targets) = extract_patches(
            &z_gt,
            &effective_mask,
            &s.dmask,
            cfg.profile.patch,
            cfg.profile.overlap,
        )?;
        let pvox = grid.patch_voxels();
        for (inp, tgt) in inputs.into_iter().zip(targets) {
            debug_assert_eq!(inp.origin, tgt.origin);
            examples.push(Example {
                payload: LayerTensor::from_vec(PATCH_CHANNELS, grid.patch, inp.data),
                target: tgt.data[..6 * pvox].to_vec(),
            });
        }
    }
    if examples.is_empty() {
        return Err(PipelineError::NoPatches);
    }

    let mut model = Model::build(cfg.variant, cfg.model_for_run())?;
    let mut adam = AdamState::new(cfg.lr, model.param_count());
    let mut loss_curve = Vec::with_capacity(cfg.epochs);

    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = CounterRng::derive(cfg.seed, EPOCH_STREAM + epoch as u64);
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let results: Vec<(f64, Vec<f64>)> = chunk
                .par_iter()
                .map(|&i| example_step(&model, &examples[i]))
                .collect::<Result<_>>()?;
            let mut grads = model.zero_grads();
            let scale = 1.0 / results.len() as f64;
            for (loss, g) in &results {
                loss_sum += loss;
                for (acc, v) in grads.iter_mut().zip(g) {
                    *acc += v * scale;
                }
            }
            adam.step(&mut model.params, &grads)?;
        }
        let mean_loss = loss_sum / examples.len() as f64;
        log::info!("epoch {epoch}: mean patch loss {mean_loss:.6}");
        loss_curve.push((epoch, mean_loss));
    }

    Ok(TrainOutcome {
        model,
        normalization,
        loss_curve,
        patches_per_epoch: examples.len(),
        effective_budgets,
    })
}

/// Train on the dataset and evaluate the result on every test subject
/// (composite inference, i.e. only the disrupted region carries model
/// output). Rows are labeled with the variant name.
pub fn train_and_evaluate(
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<(TrainOutcome, Vec<crate::evaluate::MetricRow>)> {
    let outcome = train(dataset, cfg)?;
    let settings = crate::infer::InferSettings::new(cfg.profile.clone());
    let predictor = crate::infer::ModelPredictor {
        model: &outcome.model,
    };
    let mut rows = Vec::with_capacity(dataset.test.len());
    for s in &dataset.test {
        let pred = crate::infer::infer_volume(
            &predictor,
            &s.disrupted,
            &s.mask,
            &s.dmask,
            &outcome.normalization,
            &settings,
        )?;
        rows.push(crate::evaluate::evaluate(
            cfg.variant.name(),
            cfg.seed,
            &pred,
            &s.gt,
            &s.mask,
            &s.dmask,
        )?);
    }
    Ok((outcome, rows))
}

/// Write the per-epoch loss curve as CSV.
pub fn write_loss_curve(path: &Path, curve: &[(usize, f64)]) -> Result<()> {
    let mut s = String::from("epoch,mean_loss\n");
    for (epoch, loss) in curve {
        s.push_str(&format!("{epoch},{loss}\n"));
    }
    std::fs::write(path, s).map_err(|e| PipelineError::io(path, e))
}
