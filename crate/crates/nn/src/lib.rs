//! Minimal f64 neural-network engine: dense 3D tensors, gated convolutions,
//! exact analytic gradients, Adam, and checkpointing. No external math deps.

pub mod act;
pub mod adam;
pub mod checkpoint;
pub mod conv;
pub mod error;
pub mod gated;
pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod resample;
pub mod tensor;

pub use adam::AdamState;
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, LoadedCheckpoint};
pub use conv::{conv3d_backward, conv3d_forward, xavier_uniform, ConvGrads, ConvShape};
pub use error::{NnError, Result};
pub use gated::{gated_backward, gated_forward, GatedCache, GatedParams};
pub use gradcheck::{central_diff_check, sample_coords, GradCheckReport};
pub use loss::masked_l1;
pub use model::{Model, ModelConfig, ModelVariant, Tape, TensorMeta, COEFF_CHANNELS};
pub use resample::{downsample2, downsample2_backward, upsample2, upsample2_backward};
pub use tensor::LayerTensor;
