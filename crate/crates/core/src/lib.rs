//! Core domain layer for the DTI inpainting toolkit: volume containers,
//! NIfTI-subset I/O, tensor metrics, disruption synthesis, patch geometry,
//! normalization and the deterministic phantom generator.

pub mod disrupt;
pub mod error;
pub mod metrics;
pub mod nifti;
pub mod patch;
pub mod phantom;
pub mod rng;
pub mod volume;
pub mod zscore;

pub use disrupt::{crop_superior, restrict_valid_budget, RestrictedTraining};
pub use error::{CoreError, Result};
pub use metrics::{
    eig3_symmetric, fa_from_lambda, md_from_lambda, render_rgb_slice, scalar_metrics,
    EigenDecomposition, MetricMaps, MetricQc, Plane, RgbImage,
};
pub use patch::{extract_patches, reconstruct_volume, Patch, PatchGrid, PATCH_CHANNELS};
pub use phantom::{generate_phantom, PhantomSpec};
pub use rng::CounterRng;
pub use volume::{
    spatial_index, voxel_count, BrainMask, DisruptionMask, ScalarVolume, TensorField, COEFF_LABELS,
    COEFF_ORDER,
};
pub use zscore::{zscore_apply, zscore_fit, Direction, NormalizationParams};
