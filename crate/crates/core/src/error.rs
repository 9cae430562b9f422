use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed NIfTI header: {0}")]
    MalformedHeader(String),

    #[error("unsupported NIfTI datatype code {0} (only 16 = float32 is supported)")]
    UnsupportedDatatype(i16),

    #[error("unsupported dimensionality: dim[0]={ndim}, channels={channels} (expect 3D, or 4D with 1 or 6 channels)")]
    UnsupportedDims { ndim: i16, channels: usize },

    #[error("truncated data section: expected {expected} bytes, got {got}")]
    TruncatedData { expected: usize, got: usize },

    #[error("dimension mismatch: {context} ({a:?} vs {b:?})")]
    DimMismatch {
        context: &'static str,
        a: [usize; 3],
        b: [usize; 3],
    },

    #[error("brain mask is empty")]
    EmptyMask,

    #[error("empty evaluation region")]
    EmptyRegion,

    #[error("disruption fraction {0} outside (0,1)")]
    InvalidFraction(f64),

    #[error("patch {patch:?} larger than volume {dims:?}")]
    PatchTooLarge { patch: [usize; 3], dims: [usize; 3] },

    #[error("overlap {overlap:?} must be smaller than patch {patch:?} per axis")]
    InvalidOverlap {
        overlap: [usize; 3],
        patch: [usize; 3],
    },

    #[error("missing prediction for patch {0}")]
    MissingPrediction(usize),

    #[error("prediction {index} has {got} values, expected {expected}")]
    PredictionShape {
        index: usize,
        got: usize,
        expected: usize,
    },

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("plane index {index} out of range for {plane} (max {max})")]
    PlaneIndex {
        plane: &'static str,
        index: usize,
        max: usize,
    },

    #[error("non-finite tensor coefficients at voxel {0}")]
    NonFiniteInput(usize),

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, CoreError>;
