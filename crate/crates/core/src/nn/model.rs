use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::attention::SelfAttention;
use super::conv::Conv1dLayer;
use super::dense::DenseLayer;
use super::gru::GruCell;
use super::layer::{Adapter, Layer, LayerCache, LayerOp};
use super::lstm::LstmCell;
use super::seq::{Direction, RecurrentCell, RecurrentLayer};
use super::spec::{BlockSpec, ModelSpec};
use super::NnError;
use crate::tensor::{Rng, Tensor};

/// An assembled model: `[batch x F]` in, `[batch x 1]` out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    spec: ModelSpec,
    layers: Vec<Layer>,
}

#[derive(Debug, Clone)]
pub struct ModelCache {
    layers: Vec<LayerCache>,
}

/// What the running activation looks like between layers.
#[derive(Debug, Clone, Copy)]
enum View {
    Flat(usize),
    /// `[b x channels x length]`
    Channels { channels: usize, length: usize },
    /// `[b x steps x features]`
    Steps { steps: usize, features: usize },
}

impl Model {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_features(&self) -> usize {
        self.spec.input_features
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn check_input(&self, x: &Tensor) -> Result<(), NnError> {
        match x.shape() {
            &[_, f] if f == self.spec.input_features => Ok(()),
            s => Err(NnError::Dimension(format!(
                "model expects [batch x {}], got {s:?}",
                self.spec.input_features
            ))),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ModelCache), NnError> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            let (y, c) = layer.forward(&h)?;
            caches.push(c);
            h = y;
        }
        Ok((h, ModelCache { layers: caches }))
    }

    /// Forward pass only, processed in chunks of at most `chunk` rows.
    pub fn predict(&self, x: &Tensor, chunk: usize) -> Result<Vec<f64>, NnError> {
        self.check_input(x)?;
        let rows = x.shape()[0];
        let mut out = Vec::with_capacity(rows);
        let mut start = 0;
        while start < rows {
            let end = (start + chunk.max(1)).min(rows);
            let idx: Vec<usize> = (start..end).collect();
            let mut h = x.select_rows(&idx)?;
            for layer in &self.layers {
                h = layer.infer(&h)?;
            }
            out.extend_from_slice(h.data());
            start = end;
        }
        Ok(out)
    }

    /// Gradients of the model output w.r.t. its input and every parameter,
    /// the latter aligned with [`Model::params`].
    pub fn backward(&self, cache: &ModelCache, upstream: &Tensor) -> Result<(Tensor, Vec<Tensor>), NnError> {
        if cache.layers.len() != self.layers.len() {
            return Err(NnError::StaleCache("model cache has a different layer count".into()));
        }
        let mut g = upstream.clone();
        let mut per_layer = Vec::with_capacity(self.layers.len());
        for (layer, c) in self.layers.iter().zip(&cache.layers).rev() {
            let (dx, grads) = layer.backward(c, &g)?;
            per_layer.push(grads);
            g = dx;
        }
        per_layer.reverse();
        Ok((g, per_layer.into_iter().flatten().collect()))
    }
}

fn to_channels(view: View, ops: &mut Vec<LayerOp>) -> (usize, usize) {
    match view {
        View::Flat(f) => {
            ops.push(LayerOp::Adapter(Adapter::ToChannels));
            (1, f)
        }
        View::Channels { channels, length } => (channels, length),
        View::Steps { steps, features } => {
            ops.push(LayerOp::Adapter(Adapter::SwapAxes));
            (features, steps)
        }
    }
}

fn to_steps(view: View, ops: &mut Vec<LayerOp>) -> (usize, usize) {
    match view {
        View::Flat(f) => {
            ops.push(LayerOp::Adapter(Adapter::ToSteps));
            (f, 1)
        }
        View::Channels { channels, length } => {
            ops.push(LayerOp::Adapter(Adapter::SwapAxes));
            (length, channels)
        }
        View::Steps { steps, features } => (steps, features),
    }
}

/// Instantiates `spec` with seeded Glorot-uniform weights and zero biases.
/// A pure function of `(spec, rng state)`.
pub fn build_model(spec: &ModelSpec, rng: &mut Rng) -> Result<Model, NnError> {
    if spec.input_features == 0 {
        return Err(NnError::Config("model spec: input_features must be positive".into()));
    }
    let mut ops: Vec<LayerOp> = Vec::new();
    let mut view = View::Flat(spec.input_features);
    for (bi, block) in spec.layers.iter().enumerate() {
        let seam = |what: String| NnError::Config(format!("block {bi} ({}): {what}", block_kind(block)));
        match *block {
            BlockSpec::Conv {
                filters,
                kernel,
                padding,
                activation,
            } => {
                if filters == 0 || kernel == 0 {
                    return Err(seam("filters and kernel must be positive".into()));
                }
                let (channels, length) = to_channels(view, &mut ops);
                let layer = Conv1dLayer::init(channels, filters, kernel, padding, rng)?;
                let out_len = layer
                    .output_len(length)
                    .ok_or_else(|| seam(format!("kernel {kernel} longer than incoming length {length}")))?;
                ops.push(LayerOp::Conv1d(layer));
                if activation != Activation::Linear {
                    ops.push(LayerOp::Activation(activation));
                }
                view = View::Channels {
                    channels: filters,
                    length: out_len,
                };
            }
            BlockSpec::Gru { hidden, stack, direction } | BlockSpec::Lstm { hidden, stack, direction } => {
                if hidden == 0 || stack == 0 {
                    return Err(seam("hidden and stack must be positive".into()));
                }
                let (steps, mut features) = to_steps(view, &mut ops);
                for _ in 0..stack {
                    let mut cell = || -> Result<RecurrentCell, NnError> {
                        Ok(match block {
                            BlockSpec::Gru { .. } => RecurrentCell::Gru(GruCell::init(features, hidden, rng)?),
                            _ => RecurrentCell::Lstm(LstmCell::init(features, hidden, rng)?),
                        })
                    };
                    let fwd = cell()?;
                    let bwd = match direction {
                        Direction::Forward => None,
                        Direction::Bidirectional => Some(cell()?),
                    };
                    let layer = RecurrentLayer::new(fwd, bwd, true)?;
                    features = layer.output_size();
                    ops.push(LayerOp::Recurrent(layer));
                }
                view = View::Steps { steps, features };
            }
        }
    }
    if spec.attention {
        let (steps, features) = to_steps(view, &mut ops);
        ops.push(LayerOp::Attention(SelfAttention::init(features, rng)?));
        view = View::Steps { steps, features };
    }
    // collapse to [b x features] for the dense head
    let mut width = match view {
        View::Flat(f) => f,
        View::Channels { channels, length } => {
            ops.push(LayerOp::Adapter(Adapter::Flatten));
            channels * length
        }
        View::Steps { features, .. } => {
            match ops.last_mut() {
                Some(LayerOp::Recurrent(r)) => r.return_sequences = false,
                _ => ops.push(LayerOp::Adapter(Adapter::LastStep)),
            }
            features
        }
    };
    match spec.head.last() {
        Some(d) if d.units == 1 => {}
        _ => return Err(NnError::Config("model head must end with a single output unit".into())),
    }
    for (i, d) in spec.head.iter().enumerate() {
        if d.units == 0 {
            return Err(NnError::Config(format!("head layer {i}: units must be positive")));
        }
        ops.push(LayerOp::Dense(DenseLayer::init(width, d.units, rng)?));
        if d.activation != Activation::Linear {
            ops.push(LayerOp::Activation(d.activation));
        }
        width = d.units;
    }
    Ok(Model {
        spec: spec.clone(),
        layers: ops.into_iter().map(Layer::new).collect(),
    })
}

fn block_kind(b: &BlockSpec) -> &'static str {
    match b {
        BlockSpec::Conv { .. } => "conv",
        BlockSpec::Gru { .. } => "gru",
        BlockSpec::Lstm { .. } => "lstm",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::conv::Padding;
    use crate::nn::spec::{zoo, zoo_spec, DenseSpec, ZooSizes};
    use crate::tensor::rng_uniform;

    #[test]
    fn linear_spec_is_one_dense_layer() {
        let m = build_model(&ModelSpec::linear(4), &mut Rng::new(1)).unwrap();
        assert_eq!(m.layers().len(), 1);
        assert!(matches!(m.layers()[0].op(), LayerOp::Dense(_)));
        assert_eq!(m.param_count(), 5);
    }

    #[test]
    fn default_hybrid_maps_batch_to_scalar() {
        let f = 22;
        let spec = zoo_spec("cnn-gru-dnn", f, ZooSizes::default()).unwrap();
        let m = build_model(&spec, &mut Rng::new(7)).unwrap();
        let x = rng_uniform(&mut Rng::new(8), &[8, f], 0.0, 1.0).unwrap();
        let (y, _) = m.forward(&x).unwrap();
        assert_eq!(y.shape(), &[8, 1]);
    }

    #[test]
    fn every_zoo_model_builds_and_runs() {
        let f = 6;
        let x = rng_uniform(&mut Rng::new(2), &[3, f], 0.0, 1.0).unwrap();
        for spec in zoo(f, ZooSizes::compact()) {
            let m = build_model(&spec, &mut Rng::new(3)).unwrap();
            let (y, cache) = m.forward(&x).unwrap();
            assert_eq!(y.shape(), &[3, 1], "{}", spec.name);
            let (dx, grads) = m.backward(&cache, &Tensor::ones(&[3, 1])).unwrap();
            assert_eq!(dx.shape(), x.shape());
            assert_eq!(grads.len(), m.params().len());
            for (g, p) in grads.iter().zip(m.params()) {
                assert_eq!(g.shape(), p.shape(), "{}", spec.name);
            }
        }
    }

    #[test]
    fn same_seed_same_parameters() {
        let spec = zoo_spec("cnn-bilstm", 9, ZooSizes::compact()).unwrap();
        let a = build_model(&spec, &mut Rng::new(42)).unwrap();
        let b = build_model(&spec, &mut Rng::new(42)).unwrap();
        assert_eq!(a, b);
        let c = build_model(&spec, &mut Rng::new(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn incompatible_seam_is_named() {
        let spec = ModelSpec {
            name: "bad".into(),
            input_features: 3,
            layers: vec![BlockSpec::Conv {
                filters: 2,
                kernel: 5,
                padding: Padding::Valid,
                activation: Activation::Relu,
            }],
            attention: false,
            head: vec![DenseSpec::new(1, Activation::Linear)],
        };
        let err = build_model(&spec, &mut Rng::new(1)).unwrap_err().to_string();
        assert!(err.contains("block 0 (conv)"), "{err}");
    }

    #[test]
    fn head_must_end_in_one_unit() {
        let mut spec = ModelSpec::linear(3);
        spec.head = vec![DenseSpec::new(2, Activation::Linear)];
        assert!(build_model(&spec, &mut Rng::new(1)).is_err());
        spec.head.clear();
        assert!(build_model(&spec, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn stale_cache_rejected_after_update() {
        let mut m = build_model(&ModelSpec::linear(2), &mut Rng::new(1)).unwrap();
        let x = Tensor::ones(&[1, 2]);
        let (_, cache) = m.forward(&x).unwrap();
        m.params_mut()[0].data_mut()[0] += 0.1;
        assert!(matches!(m.backward(&cache, &Tensor::ones(&[1, 1])), Err(NnError::StaleCache(_))));
    }

    #[test]
    fn cache_from_other_model_rejected() {
        let a = build_model(&ModelSpec::linear(2), &mut Rng::new(1)).unwrap();
        let b = build_model(&ModelSpec::linear(2), &mut Rng::new(1)).unwrap();
        let (_, cache) = a.forward(&Tensor::ones(&[1, 2])).unwrap();
        assert!(b.backward(&cache, &Tensor::ones(&[1, 1])).is_err());
    }

    #[test]
    fn predict_matches_forward() {
        let spec = zoo_spec("s-gru", 5, ZooSizes::compact()).unwrap();
        let m = build_model(&spec, &mut Rng::new(4)).unwrap();
        let x = rng_uniform(&mut Rng::new(5), &[7, 5], 0.0, 1.0).unwrap();
        let (y, _) = m.forward(&x).unwrap();
        assert_eq!(m.predict(&x, 3).unwrap(), y.data());
    }
}
