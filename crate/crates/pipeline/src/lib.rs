//! Experiment pipeline: dataset synthesis, training, inference, evaluation,
//! ablations and the valid-slice efficiency sweep.

pub mod ablation;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod infer;
pub mod report;
pub mod sweep;
pub mod train;

pub use error::{PipelineError, Result};
