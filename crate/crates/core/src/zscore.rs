//! Per-coefficient z-score normalization fitted over brain voxels only.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::volume::{BrainMask, TensorField};

/// Floor applied to the population standard deviation; a constant channel
/// then normalizes to exactly 0 because x - mean is exactly 0.
pub const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub mean: [f64; 6],
    pub std: [f64; 6],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Fit per-coefficient mean and population std over the union of brain
/// voxels of all supplied fields. Streaming Welford accumulation; the test
/// suite checks it against an independent two-pass computation.
pub fn zscore_fit(fields: &[&TensorField], masks: &[&BrainMask]) -> Result<NormalizationParams> {
    assert_eq!(fields.len(), masks.len(), "one mask per field");
    let mut mean = [0f64; 6];
    let mut m2 = [0f64; 6];
    let mut count = 0u64;
    for (field, mask) in fields.iter().zip(masks) {
        field.same_dims(mask.dims, "zscore_fit field vs mask")?;
        let n = field.nvox();
        for (idx, &m) in mask.data.iter().enumerate() {
            if m == 0 {
                continue;
            }
            count += 1;
            for c in 0..6 {
                let x = field.coeffs[c * n + idx];
                let delta = x - mean[c];
                mean[c] += delta / count as f64;
                m2[c] += delta * (x - mean[c]);
            }
        }
    }
    if count == 0 {
        return Err(CoreError::EmptyMask);
    }
    let mut std = [0f64; 6];
    for c in 0..6 {
        std[c] = (m2[c] / count as f64).sqrt().max(STD_FLOOR);
    }
    Ok(NormalizationParams { mean, std })
}

/// Apply (x - mean)/std per coefficient, or the exact inverse.
pub fn zscore_apply(
    field: &TensorField,
    params: &NormalizationParams,
    direction: Direction,
) -> TensorField {
    let mut out = field.clone();
    let n = field.nvox();
    for c in 0..6 {
        let (mean, std) = (params.mean[c], params.std[c]);
        let chan = &mut out.coeffs[c * n..(c + 1) * n];
        match direction {
            Direction::Forward => {
                let inv = 1.0 / std;
                for v in chan.iter_mut() {
                    *v = (*v - mean) * inv;
                }
            }
            Direction::Inverse => {
                for v in chan.iter_mut() {
                    *v = *v * std + mean;
                }
            }
        }
    }
    out
}
