//! Full-volume inference: normalize, tile into patches, predict each patch,
//! blend the overlaps back into a volume, denormalize, and composite the
//! prediction into the disrupted region.

use dti_core::{
    extract_patches, reconstruct_volume, zscore_apply, BrainMask, Direction, DisruptionMask,
    NormalizationParams, TensorField, PATCH_CHANNELS,
};
use dti_nn::{LayerTensor, Model};
use rayon::prelude::*;

use crate::config::PatchProfile;
use crate::error::Result;

/// Anything that maps a 7-channel patch payload (six normalized coefficients
/// plus the brain-mask channel) to a 6-channel prediction.
pub trait PatchPredictor: Sync {
    fn predict(&self, payload: &LayerTensor) -> Result<Vec<f64>>;
}

/// Echoes the six coefficient channels of the payload unchanged. Exercises
/// every pipeline stage except the network itself.
pub struct IdentityPredictor;

impl PatchPredictor for IdentityPredictor {
    fn predict(&self, payload: &LayerTensor) -> Result<Vec<f64>> {
        Ok(payload.data[..6 * payload.nvox()].to_vec())
    }
}

/// Runs the trained network on each payload.
pub struct ModelPredictor<'a> {
    pub model: &'a Model,
}

impl PatchPredictor for ModelPredictor<'_> {
    fn predict(&self, payload: &LayerTensor) -> Result<Vec<f64>> {
        Ok(self.model.forward(payload)?.data)
    }
}

#[derive(Debug, Clone)]
pub struct InferSettings {
    pub profile: PatchProfile,
    /// When true (the default), voxels outside the disrupted region are
    /// replaced by the original input values so only the region carries
    /// model output. `--raw` turns this off.
    pub composite: bool,
}

impl InferSettings {
    pub fn new(profile: PatchProfile) -> Self {
        InferSettings {
            profile,
            composite: true,
        }
    }
}

/// Inpaint a disrupted tensor field. Patches are predicted independently (in
/// parallel when a thread pool is configured) and collected in grid order,
/// so the blended result is identical for any thread count.
pub fn infer_volume(
    predictor: &dyn PatchPredictor,
    disrupted: &TensorField,
    mask: &BrainMask,
    dmask: &DisruptionMask,
    norm: &NormalizationParams,
    settings: &InferSettings,
) -> Result<TensorField> {
    let z = zscore_apply(disrupted, norm, Direction::Forward);
    let (grid, patches) = extract_patches(
        &z,
        mask,
        dmask,
        settings.profile.patch,
        settings.profile.overlap,
    )?;
    let predictions: Vec<Vec<f64>> = patches
        .par_iter()
        .map(|p| {
            let payload = LayerTensor::from_vec(PATCH_CHANNELS, grid.patch, p.data.clone());
            predictor.predict(&payload)
        })
        .collect::<Result<_>>()?;
    let blended = reconstruct_volume(&grid, &predictions, &z)?;
    let mut out = zscore_apply(&blended, norm, Direction::Inverse);
    if settings.composite {
        for c in 0..6 {
            let src = disrupted.channel(c);
            let dst = out.channel_mut(c);
            for i in 0..src.len() {
                if dmask.data[i] == 0 {
                    dst[i] = src[i];
                }
            }
        }
    }
    Ok(out)
}
