//! Masked L1: mean absolute error over mask voxels, subgradient sign/count.

use crate::error::{NnError, Result};

/// Loss and its gradient wrt `pred`. `mask` is per-value (same length as
/// `pred`); nonzero means included. Gradient is sign(pred-target)/count
/// inside the mask, 0 outside; sign(0) = 0 at ties.
pub fn masked_l1(pred: &[f64], target: &[f64], mask: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.len() != mask.len() {
        return Err(NnError::ShapeMismatch {
            context: "masked_l1",
            a: vec![pred.len(), target.len()],
            b: vec![mask.len()],
        });
    }
    let count = mask.iter().filter(|&&m| m != 0.0).count();
    if count == 0 {
        return Err(NnError::EmptyMask);
    }
    let inv = 1.0 / count as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0f64; pred.len()];
    for i in 0..pred.len() {
        if mask[i] == 0.0 {
            continue;
        }
        let d = pred[i] - target[i];
        loss += d.abs();
        grad[i] = if d > 0.0 {
            inv
        } else if d < 0.0 {
            -inv
        } else {
            0.0
        };
    }
    Ok((loss * inv, grad))
}
