//! Tensor-derived scalar metrics and renderings.

pub mod eig;
pub mod maps;
pub mod rgb;

pub use eig::{eig3_symmetric, fa_from_lambda, md_from_lambda, EigenDecomposition};
pub use maps::{scalar_metrics, MetricMaps, MetricQc};
pub use rgb::{render_rgb_slice, Plane, RgbImage};
