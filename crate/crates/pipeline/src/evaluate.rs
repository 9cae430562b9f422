//! Recovery metrics comparing an inpainted tensor field against ground
//! truth: tensor-level error over the brain, and clinically weighted scalar
//! map errors over the disrupted region.

use dti_core::{scalar_metrics, BrainMask, DisruptionMask, TensorField};
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

/// One evaluation result row: a method label, the seed that produced the
/// prediction, and the metric columns in report order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: String,
    pub seed: u64,
    /// Mean |pred - gt| over brain voxels, all six coefficients.
    pub mae: f64,
    /// 10*log10(peak^2 / MSE) over the same support; peak is the ground
    /// truth's max-min range over the brain. Infinite when pred == gt.
    pub psnr: f64,
    /// Mean |FA(pred) - FA(gt)| over the disrupted region inside the brain.
    pub fa_mae_region: f64,
    /// Mean |FA(pred) - FA(gt)| over the whole brain.
    pub fa_mae_brain: f64,
    pub ad_mae_region: f64,
    pub md_mae_region: f64,
    /// Tensor MAE restricted to the disrupted region.
    pub mae_region: f64,
    /// PSNR restricted to the disrupted region (same brain-range peak).
    pub psnr_region: f64,
}

/// Support voxels: indices selected by a mask predicate.
fn support_indices(keep: impl Fn(usize) -> bool, nvox: usize) -> Vec<usize> {
    (0..nvox).filter(|&i| keep(i)).collect()
}

fn mean_abs_diff(a: &[f64], b: &[f64], support: &[usize]) -> f64 {
    let sum: f64 = support.iter().map(|&i| (a[i] - b[i]).abs()).sum();
    sum / support.len() as f64
}

/// Tensor MAE/MSE over a voxel support, pooled across the six channels.
fn tensor_errors(pred: &TensorField, gt: &TensorField, support: &[usize]) -> (f64, f64) {
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for c in 0..6 {
        let p = pred.channel(c);
        let g = gt.channel(c);
        for &i in support {
            let d = p[i] - g[i];
            abs_sum += d.abs();
            sq_sum += d * d;
        }
    }
    let n = (6 * support.len()) as f64;
    (abs_sum / n, sq_sum / n)
}

fn psnr_from(peak: f64, mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

/// Evaluate a prediction against ground truth. The brain mask defines the
/// tensor-error support; the disrupted region (intersected with the brain)
/// defines the regional columns.
pub fn evaluate(
    method: impl Into<String>,
    seed: u64,
    pred: &TensorField,
    gt: &TensorField,
    mask: &BrainMask,
    dmask: &DisruptionMask,
) -> Result<MetricRow> {
    pred.same_dims(gt.dims, "evaluate")?;
    pred.same_dims(mask.dims, "evaluate")?;
    pred.same_dims(dmask.dims, "evaluate")?;
    let nvox = pred.nvox();
    let brain = support_indices(|i| mask.data[i] != 0, nvox);
    if brain.is_empty() {
        return Err(PipelineError::EmptyRegion("brain mask"));
    }
    let region = support_indices(|i| mask.data[i] != 0 && dmask.data[i] != 0, nvox);
    if region.is_empty() {
        return Err(PipelineError::EmptyRegion("disrupted region"));
    }

    // Peak: the ground truth's value range over the brain, pooled channels.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in 0..6 {
        let g = gt.channel(c);
        for &i in &brain {
            lo = lo.min(g[i]);
            hi = hi.max(g[i]);
        }
    }
    let peak = hi - lo;

    let (mae, mse) = tensor_errors(pred, gt, &brain);
    let (mae_region, mse_region) = tensor_errors(pred, gt, &region);

    let mp = scalar_metrics(pred, mask)?;
    let mg = scalar_metrics(gt, mask)?;

    Ok(MetricRow {
        method: method.into(),
        seed,
        mae,
        psnr: psnr_from(peak, mse),
        fa_mae_region: mean_abs_diff(&mp.fa.data, &mg.fa.data, &region),
        fa_mae_brain: mean_abs_diff(&mp.fa.data, &mg.fa.data, &brain),
        ad_mae_region: mean_abs_diff(&mp.ad.data, &mg.ad.data, &region),
        md_mae_region: mean_abs_diff(&mp.md.data, &mg.md.data, &region),
        mae_region,
        psnr_region: psnr_from(peak, mse_region),
    })
}

/// Reference rows for the un-inpainted disrupted volumes: one per test
/// subject, labeled "cropped". No model is involved; the prediction is the
/// zero-filled input itself.
pub fn cropped_rows(dataset: &crate::dataset::Dataset, seed: u64) -> Result<Vec<MetricRow>> {
    dataset
        .test
        .iter()
        .map(|s| evaluate("cropped", seed, &s.disrupted, &s.gt, &s.mask, &s.dmask))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{make_subject, scaled_default_spec};

    fn subject() -> crate::dataset::Subject {
        make_subject(&scaled_default_spec([32, 32, 32]), "s", 0.10).unwrap()
    }

    #[test]
    fn identical_prediction_gives_zero_error_and_infinite_psnr() {
        let s = subject();
        let row = evaluate("self", 1, &s.gt, &s.gt, &s.mask, &s.dmask).unwrap();
        assert_eq!(row.mae, 0.0);
        assert_eq!(row.fa_mae_region, 0.0);
        assert_eq!(row.fa_mae_brain, 0.0);
        assert!(row.psnr.is_infinite() && row.psnr > 0.0);
        assert!(row.psnr_region.is_infinite());
    }

    #[test]
    fn constant_offset_matches_direct_psnr_formula() {
        let s = subject();
        let mut pred = s.gt.clone();
        // Constant error on one channel over every voxel: MSE over the
        // 6-channel support is err^2/6.
        let err = 1e-3;
        for v in pred.channel_mut(0) {
            *v += err;
        }
        let row = evaluate("offset", 0, &pred, &s.gt, &s.mask, &s.dmask).unwrap();
        assert!((row.mae - err / 6.0).abs() < 1e-15);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in 0..6 {
            let g = s.gt.channel(c);
            for i in 0..s.gt.nvox() {
                if s.mask.data[i] != 0 {
                    lo = lo.min(g[i]);
                    hi = hi.max(g[i]);
                }
            }
        }
        let peak = hi - lo;
        let expect = 10.0 * (peak * peak / (err * err / 6.0)).log10();
        assert!(
            (row.psnr - expect).abs() < 1e-10,
            "{} vs {expect}",
            row.psnr
        );
    }

    #[test]
    fn zero_fill_regional_fa_equals_mean_gt_fa_in_region() {
        let s = subject();
        let row = evaluate("cropped", 0, &s.disrupted, &s.gt, &s.mask, &s.dmask).unwrap();
        // FA of the zero tensor is defined as 0, so the regional FA MAE is
        // exactly the mean ground-truth FA over the region.
        let maps = scalar_metrics(&s.gt, &s.mask).unwrap();
        let mut sum = 0.0;
        let mut n = 0usize;
        for i in 0..s.gt.nvox() {
            if s.mask.data[i] != 0 && s.dmask.data[i] != 0 {
                sum += maps.fa.data[i];
                n += 1;
            }
        }
        let analytic = sum / n as f64;
        assert!(
            (row.fa_mae_region - analytic).abs() < 1e-12,
            "{} vs {analytic}",
            row.fa_mae_region
        );
        assert!(
            analytic > 0.05,
            "phantom should have anisotropy in the crop region"
        );
        // Outside-region values are untouched by the crop, so the whole-brain
        // FA error is strictly smaller than the regional one.
        assert!(row.fa_mae_brain < row.fa_mae_region);
    }

    #[test]
    fn error_core_is_symmetric() {
        let s = subject();
        let a = evaluate("ab", 0, &s.disrupted, &s.gt, &s.mask, &s.dmask).unwrap();
        let b = evaluate("ba", 0, &s.gt, &s.disrupted, &s.mask, &s.dmask).unwrap();
        assert_eq!(a.mae, b.mae);
        assert_eq!(a.fa_mae_region, b.fa_mae_region);
        assert_eq!(a.ad_mae_region, b.ad_mae_region);
        assert_eq!(a.md_mae_region, b.md_mae_region);
        assert_eq!(a.mae_region, b.mae_region);
        // PSNR uses the ground truth's range, so it is not symmetric; the
        // squared-error core is.
    }

    #[test]
    fn dim_mismatch_and_empty_region_are_rejected() {
        let s = subject();
        let other = TensorField::zeros([16, 16, 16], s.gt.voxel_size);
        assert!(evaluate("x", 0, &other, &s.gt, &s.mask, &s.dmask).is_err());

        let empty = DisruptionMask {
            dims: s.gt.dims,
            data: vec![0u8; s.gt.nvox()],
            slices: vec![],
            fraction: 0.1,
        };
        assert!(matches!(
            evaluate("x", 0, &s.gt, &s.gt, &s.mask, &empty),
            Err(PipelineError::EmptyRegion(_))
        ));
    }
}
