//! Length-of-stay regression engine: tensors, hand-differentiated layers,
//! training, data wrangling, cross-validated evaluation and the
//! feature/hyper-parameter/depth studies.

pub mod data;
pub mod eval;
pub mod nn;
pub mod studies;
pub mod tensor;
pub mod train;

pub use data::{Dataset, FeatureMatrix};
pub use nn::{build_model, Model, ModelSpec};
pub use tensor::{Rng, Tensor};
pub use train::{MetricsReport, TrainConfig, TrainHistory};
