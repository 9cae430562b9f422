use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("channel mismatch in {context}: got {got}, expected {expected}")]
    ChannelMismatch {
        context: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("shape mismatch in {context}: {a:?} vs {b:?}")]
    ShapeMismatch {
        context: &'static str,
        a: Vec<usize>,
        b: Vec<usize>,
    },

    #[error("kernel size {0} not supported (must be odd)")]
    EvenKernel(usize),

    #[error("stride {0} not supported (must be >= 1)")]
    BadStride(usize),

    #[error("spatial dims {dims:?} not divisible by 2 for downsampling")]
    OddDims { dims: [usize; 3] },

    #[error("spatial dims {dims:?} not divisible by {divisor} (model depth {depth})")]
    IndivisibleDims {
        dims: [usize; 3],
        divisor: usize,
        depth: usize,
    },

    #[error("mask selects no voxels")]
    EmptyMask,

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error("invalid model config: {0}")]
    BadConfig(String),

    #[error("checkpoint {}: {detail}", path.display())]
    Checkpoint { path: PathBuf, detail: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, NnError>;
