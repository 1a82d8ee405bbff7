//! Layers with hand-derived backward passes, and model assembly.
//!
//! Tabular rows enter as `[batch x F]`. Convolutional blocks see them as a
//! single channel of length `F`; recurrent blocks as `F` steps of one
//! feature. [`build_model`] inserts the reshapes between views.

pub mod activation;
pub mod attention;
pub mod conv;
pub mod dense;
pub mod gru;
pub mod layer;
pub mod lstm;
pub mod model;
pub mod seq;
pub mod spec;

pub use activation::{activation_apply, activation_backward, sigmoid, Activation};
pub use attention::{self_attention_forward, softmax_rows, SelfAttention};
pub use conv::{conv1d_forward, Conv1dLayer, Padding};
pub use dense::{dense_forward, DenseLayer};
pub use gru::{gru_cell_step, gru_cell_step_backward, gru_sequence_forward, gru_stack_forward, GruCell, GruStepCache};
pub use layer::{layer_backward, Adapter, Layer, LayerCache, LayerOp};
pub use lstm::{bilstm_forward, lstm_cell_step, lstm_cell_step_backward, LstmCell, LstmStepCache};
pub use model::{build_model, Model, ModelCache};
pub use seq::{Direction, RecurrentCell, RecurrentLayer};
pub use spec::{display_name, zoo, zoo_spec, BlockSpec, DenseSpec, ModelSpec, ZooSizes, PROPOSED_MODEL, ZOO_NAMES};

use thiserror::Error;

use crate::tensor::{rng_uniform, Rng, Tensor, TensorError};

#[derive(Debug, Error)]
pub enum NnError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stale or mismatched cache: {0}")]
    StaleCache(String),
}

/// Glorot-uniform initialisation: `U(-l, l)` with `l = sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot(rng: &mut Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Result<Tensor, TensorError> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    rng_uniform(rng, shape, -limit, limit)
}
