use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::activation::{activation_apply, activation_backward, Activation};
use super::attention::{AttentionCache, SelfAttention};
use super::conv::{conv1d_forward, Conv1dLayer};
use super::dense::{dense_forward, DenseLayer};
use super::seq::{RecurrentLayer, RecurrentLayerCache};
use super::NnError;
use crate::tensor::Tensor;

static NEXT_LAYER_ID: AtomicU64 = AtomicU64::new(1);

/// Shape adapters between the tabular, channel-major and step-major views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Adapter {
    /// `[b x F]` to `[b x 1 x F]`
    ToChannels,
    /// `[b x F]` to `[b x F x 1]`
    ToSteps,
    /// `[b x A x B]` to `[b x B x A]`
    SwapAxes,
    /// `[b x A x B]` to `[b x A*B]`
    Flatten,
    /// `[b x T x d]` to `[b x d]` taking the last step
    LastStep,
}

impl Adapter {
    fn apply(self, x: &Tensor) -> Result<Tensor, NnError> {
        let s = x.shape();
        let bad = || NnError::Dimension(format!("{self:?} cannot apply to {s:?}"));
        Ok(match (self, s) {
            (Adapter::ToChannels, &[b, f]) => x.reshape(&[b, 1, f])?,
            (Adapter::ToSteps, &[b, f]) => x.reshape(&[b, f, 1])?,
            (Adapter::SwapAxes, &[_, _, _]) => x.swap_last2()?,
            (Adapter::Flatten, &[b, r, c]) => x.reshape(&[b, r * c])?,
            (Adapter::LastStep, &[b, t, d]) => {
                let mut out = Vec::with_capacity(b * d);
                for bi in 0..b {
                    let off = (bi * t + t - 1) * d;
                    out.extend_from_slice(&x.data()[off..off + d]);
                }
                Tensor::new(&[b, d], out)?
            }
            _ => return Err(bad()),
        })
    }

    fn backward(self, input_shape: &[usize], upstream: &Tensor) -> Result<Tensor, NnError> {
        Ok(match (self, input_shape) {
            (Adapter::SwapAxes, _) => upstream.swap_last2()?,
            (Adapter::LastStep, &[b, t, d]) => {
                let mut out = vec![0.0; b * t * d];
                for bi in 0..b {
                    let off = (bi * t + t - 1) * d;
                    out[off..off + d].copy_from_slice(&upstream.data()[bi * d..(bi + 1) * d]);
                }
                Tensor::new(input_shape, out)?
            }
            _ => upstream.reshape(input_shape)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerOp {
    Dense(DenseLayer),
    Conv1d(Conv1dLayer),
    Activation(Activation),
    Recurrent(RecurrentLayer),
    Attention(SelfAttention),
    Adapter(Adapter),
}

impl LayerOp {
    fn name(&self) -> &'static str {
        match self {
            LayerOp::Dense(_) => "dense",
            LayerOp::Conv1d(_) => "conv1d",
            LayerOp::Activation(_) => "activation",
            LayerOp::Recurrent(_) => "recurrent",
            LayerOp::Attention(_) => "attention",
            LayerOp::Adapter(_) => "adapter",
        }
    }
}

/// A layer plus the bookkeeping that lets a backward call detect caches
/// produced by a different layer or before a parameter update.
#[derive(Debug, Serialize, Deserialize)]
pub struct Layer {
    op: LayerOp,
    #[serde(skip, default = "fresh_id")]
    id: u64,
    #[serde(skip)]
    generation: u64,
}

fn fresh_id() -> u64 {
    NEXT_LAYER_ID.fetch_add(1, Ordering::Relaxed)
}

impl Clone for Layer {
    fn clone(&self) -> Self {
        Self::new(self.op.clone())
    }
}

impl PartialEq for Layer {
    fn eq(&self, other: &Self) -> bool {
        self.op == other.op
    }
}

#[derive(Debug, Clone)]
enum CacheInner {
    Input(Tensor),
    Recurrent(RecurrentLayerCache),
    Attention(AttentionCache),
    Shape(Vec<usize>),
}

/// Forward-pass intermediates for one layer.
#[derive(Debug, Clone)]
pub struct LayerCache {
    layer_id: u64,
    generation: u64,
    output_shape: Vec<usize>,
    inner: CacheInner,
}

impl Layer {
    pub fn new(op: LayerOp) -> Self {
        Self {
            op,
            id: fresh_id(),
            generation: 0,
        }
    }

    pub fn op(&self) -> &LayerOp {
        &self.op
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match &self.op {
            LayerOp::Dense(l) => l.params(),
            LayerOp::Conv1d(l) => l.params(),
            LayerOp::Recurrent(l) => l.params(),
            LayerOp::Attention(l) => l.params(),
            LayerOp::Activation(_) | LayerOp::Adapter(_) => vec![],
        }
    }

    /// Mutable parameters. Invalidates caches from earlier forward calls.
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.generation += 1;
        match &mut self.op {
            LayerOp::Dense(l) => l.params_mut(),
            LayerOp::Conv1d(l) => l.params_mut(),
            LayerOp::Recurrent(l) => l.params_mut(),
            LayerOp::Attention(l) => l.params_mut(),
            LayerOp::Activation(_) | LayerOp::Adapter(_) => vec![],
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, LayerCache), NnError> {
        let (y, inner) = match &self.op {
            LayerOp::Dense(l) => (dense_forward(l, x)?, CacheInner::Input(x.clone())),
            LayerOp::Conv1d(l) => (conv1d_forward(l, x)?, CacheInner::Input(x.clone())),
            LayerOp::Activation(a) => (activation_apply(*a, x)?, CacheInner::Input(x.clone())),
            LayerOp::Recurrent(l) => {
                let (y, c) = l.forward(x)?;
                (y, CacheInner::Recurrent(c))
            }
            LayerOp::Attention(l) => {
                let (y, c) = l.forward(x)?;
                (y, CacheInner::Attention(c))
            }
            LayerOp::Adapter(a) => (a.apply(x)?, CacheInner::Shape(x.shape().to_vec())),
        };
        let cache = LayerCache {
            layer_id: self.id,
            generation: self.generation,
            output_shape: y.shape().to_vec(),
            inner,
        };
        Ok((y, cache))
    }

    /// Forward without keeping intermediates.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor, NnError> {
        Ok(match &self.op {
            LayerOp::Dense(l) => dense_forward(l, x)?,
            LayerOp::Conv1d(l) => conv1d_forward(l, x)?,
            LayerOp::Activation(a) => activation_apply(*a, x)?,
            LayerOp::Adapter(a) => a.apply(x)?,
            _ => self.forward(x)?.0,
        })
    }

    /// Returns `(input_grad, parameter_grads)` with grads aligned to [`Layer::params`].
    pub fn backward(&self, cache: &LayerCache, upstream: &Tensor) -> Result<(Tensor, Vec<Tensor>), NnError> {
        if cache.layer_id != self.id || cache.generation != self.generation {
            return Err(NnError::StaleCache(format!(
                "{} layer: cache belongs to another layer or predates a parameter update",
                self.op.name()
            )));
        }
        if upstream.shape() != cache.output_shape.as_slice() {
            return Err(NnError::StaleCache(format!(
                "{} layer: upstream {:?} vs forward output {:?}",
                self.op.name(),
                upstream.shape(),
                cache.output_shape
            )));
        }
        match (&self.op, &cache.inner) {
            (LayerOp::Dense(l), CacheInner::Input(x)) => l.backward(x, upstream),
            (LayerOp::Conv1d(l), CacheInner::Input(x)) => l.backward(x, upstream),
            (LayerOp::Activation(a), CacheInner::Input(x)) => Ok((activation_backward(*a, x, upstream)?, vec![])),
            (LayerOp::Recurrent(l), CacheInner::Recurrent(c)) => l.backward(c, upstream),
            (LayerOp::Attention(l), CacheInner::Attention(c)) => l.backward(c, upstream),
            (LayerOp::Adapter(a), CacheInner::Shape(s)) => Ok((a.backward(s, upstream)?, vec![])),
            _ => Err(NnError::StaleCache(format!("{} layer: cache of the wrong kind", self.op.name()))),
        }
    }
}

/// Exact gradients of a layer's forward map, given the cache of the matching
/// forward call and the gradient w.r.t. its output.
pub fn layer_backward(layer: &Layer, cache: &LayerCache, upstream: &Tensor) -> Result<(Tensor, Vec<Tensor>), NnError> {
    layer.backward(cache, upstream)
}
