//! Sequence plumbing shared by the recurrent cells, and the recurrent layer
//! used in assembled models (one or two directions, sequence or final-state
//! output).

use serde::{Deserialize, Serialize};

use super::gru::{GruCell, GruSequenceCache};
use super::lstm::{LstmCell, LstmSequenceCache};
use super::NnError;
use crate::tensor::Tensor;

pub(crate) trait SequenceCell {
    type Cache;
    /// Runs the whole sequence from a zero state. With `reverse`, steps are
    /// consumed from last to first but outputs stay at their original
    /// positions. Returns `(sequence, final_state, cache)`.
    fn seq_forward(&self, x: &Tensor, reverse: bool) -> Result<(Tensor, Tensor, Self::Cache), NnError>;
    /// `d_seq` is the gradient w.r.t. every position of the output sequence.
    fn seq_backward(&self, cache: &Self::Cache, d_seq: &Tensor) -> Result<(Tensor, Vec<Tensor>), NnError>;
}

pub(crate) fn seq_dims(x: &Tensor, features: usize) -> Result<(usize, usize, usize), NnError> {
    match x.shape() {
        &[b, t, f] if f == features => Ok((b, t, f)),
        s => Err(NnError::Dimension(format!(
            "recurrent layer expects [batch x steps x {features}], got {s:?}"
        ))),
    }
}

/// Rows `b*steps + t` of a `[(batch*steps) x cols]` tensor.
pub(crate) fn gather_step(flat: &Tensor, batch: usize, steps: usize, t: usize) -> Tensor {
    let cols = flat.shape()[1];
    let mut out = Vec::with_capacity(batch * cols);
    for b in 0..batch {
        let r = b * steps + t;
        out.extend_from_slice(&flat.data()[r * cols..(r + 1) * cols]);
    }
    Tensor::new(&[batch, cols], out).expect("gathered rows are finite")
}

pub(crate) fn scatter_step(dst: &mut [f64], src: &Tensor, batch: usize, steps: usize, t: usize) {
    let cols = src.shape()[1];
    for b in 0..batch {
        let r = b * steps + t;
        dst[r * cols..(r + 1) * cols].copy_from_slice(&src.data()[b * cols..(b + 1) * cols]);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Forward,
    Bidirectional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RecurrentCell {
    Gru(GruCell),
    Lstm(LstmCell),
}

#[derive(Debug, Clone)]
pub enum RecurrentCache {
    Gru(GruSequenceCache),
    Lstm(LstmSequenceCache),
}

impl RecurrentCell {
    pub fn input_size(&self) -> usize {
        match self {
            Self::Gru(c) => c.input_size(),
            Self::Lstm(c) => c.input_size(),
        }
    }

    pub fn hidden_size(&self) -> usize {
        match self {
            Self::Gru(c) => c.hidden_size(),
            Self::Lstm(c) => c.hidden_size(),
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Self::Gru(c) => c.params(),
            Self::Lstm(c) => c.params(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Self::Gru(c) => c.params_mut(),
            Self::Lstm(c) => c.params_mut(),
        }
    }

    fn forward(&self, x: &Tensor, reverse: bool) -> Result<(Tensor, Tensor, RecurrentCache), NnError> {
        Ok(match self {
            Self::Gru(c) => {
                let (s, l, k) = c.seq_forward(x, reverse)?;
                (s, l, RecurrentCache::Gru(k))
            }
            Self::Lstm(c) => {
                let (s, l, k) = c.seq_forward(x, reverse)?;
                (s, l, RecurrentCache::Lstm(k))
            }
        })
    }

    fn backward(&self, cache: &RecurrentCache, d_seq: &Tensor) -> Result<(Tensor, Vec<Tensor>), NnError> {
        match (self, cache) {
            (Self::Gru(c), RecurrentCache::Gru(k)) => c.seq_backward(k, d_seq),
            (Self::Lstm(c), RecurrentCache::Lstm(k)) => c.seq_backward(k, d_seq),
            _ => Err(NnError::StaleCache("recurrent cache from a different cell type".into())),
        }
    }
}

/// One recurrent layer of a model. With a backward cell the layer is
/// bidirectional and its feature size is twice the hidden size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentLayer {
    pub forward: RecurrentCell,
    pub backward: Option<RecurrentCell>,
    /// Emit `[batch x steps x features]`; otherwise only the final state `[batch x features]`.
    pub return_sequences: bool,
}

#[derive(Debug, Clone)]
pub struct RecurrentLayerCache {
    forward: RecurrentCache,
    backward: Option<RecurrentCache>,
    batch: usize,
    steps: usize,
}

impl RecurrentLayer {
    pub fn new(forward: RecurrentCell, backward: Option<RecurrentCell>, return_sequences: bool) -> Result<Self, NnError> {
        if let Some(b) = &backward {
            if b.hidden_size() != forward.hidden_size() || b.input_size() != forward.input_size() {
                return Err(NnError::Config(format!(
                    "bidirectional cells differ: hidden {} vs {}, input {} vs {}",
                    forward.hidden_size(),
                    b.hidden_size(),
                    forward.input_size(),
                    b.input_size()
                )));
            }
        }
        Ok(Self {
            forward,
            backward,
            return_sequences,
        })
    }

    pub fn output_size(&self) -> usize {
        self.forward.hidden_size() * if self.backward.is_some() { 2 } else { 1 }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = self.forward.params();
        if let Some(b) = &self.backward {
            p.extend(b.params());
        }
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.forward.params_mut();
        if let Some(b) = &mut self.backward {
            p.extend(b.params_mut());
        }
        p
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, RecurrentLayerCache), NnError> {
        let (batch, steps, _) = seq_dims(x, self.forward.input_size())?;
        let (fs, fl, fc) = self.forward.forward(x, false)?;
        let Some(bcell) = &self.backward else {
            let out = if self.return_sequences { fs } else { fl };
            return Ok((
                out,
                RecurrentLayerCache {
                    forward: fc,
                    backward: None,
                    batch,
                    steps,
                },
            ));
        };
        let (bs, bl, bc) = bcell.forward(x, true)?;
        let out = if self.return_sequences {
            concat_last(&fs, &bs)?
        } else {
            concat_last(&fl, &bl)?
        };
        Ok((
            out,
            RecurrentLayerCache {
                forward: fc,
                backward: Some(bc),
                batch,
                steps,
            },
        ))
    }

    pub fn backward(&self, cache: &RecurrentLayerCache, upstream: &Tensor) -> Result<(Tensor, Vec<Tensor>), NnError> {
        let (batch, steps) = (cache.batch, cache.steps);
        let hidden = self.forward.hidden_size();
        let expected: Vec<usize> = if self.return_sequences {
            vec![batch, steps, self.output_size()]
        } else {
            vec![batch, self.output_size()]
        };
        if upstream.shape() != expected.as_slice() {
            return Err(NnError::StaleCache(format!(
                "recurrent layer: upstream {:?} vs expected {expected:?}",
                upstream.shape()
            )));
        }
        let (d_fwd, d_bwd) = match &self.backward {
            None => (upstream.clone(), None),
            Some(_) => {
                let (a, b) = split_last(upstream, hidden)?;
                (a, Some(b))
            }
        };
        // final state of the forward pass sits at step steps-1, of the reverse pass at step 0
        let to_seq = |d: Tensor, t: usize| -> Result<Tensor, NnError> {
            if self.return_sequences {
                return Ok(d);
            }
            let mut full = vec![0.0; batch * steps * hidden];
            super::seq::scatter_step(&mut full, &d, batch, steps, t);
            Ok(Tensor::new(&[batch, steps, hidden], full)?)
        };
        let (mut dx, mut grads) = self.forward.backward(&cache.forward, &to_seq(d_fwd, steps - 1)?)?;
        if let (Some(bcell), Some(bcache), Some(d)) = (&self.backward, &cache.backward, d_bwd) {
            let (dxb, gb) = bcell.backward(bcache, &to_seq(d, 0)?)?;
            dx.add_assign(&dxb)?;
            grads.extend(gb);
        } else if self.backward.is_some() {
            return Err(NnError::StaleCache("bidirectional layer given a unidirectional cache".into()));
        }
        Ok((dx, grads))
    }
}

/// Concatenates two tensors of identical leading shape along the last axis.
pub(crate) fn concat_last(a: &Tensor, b: &Tensor) -> Result<Tensor, NnError> {
    let (ra, rb) = (a.shape(), b.shape());
    if ra.len() != rb.len() || ra[..ra.len() - 1] != rb[..rb.len() - 1] {
        return Err(NnError::Dimension(format!("cannot concatenate {ra:?} and {rb:?}")));
    }
    let (ca, cb) = (ra[ra.len() - 1], rb[rb.len() - 1]);
    let rows = a.len() / ca;
    let mut out = Vec::with_capacity(a.len() + b.len());
    for r in 0..rows {
        out.extend_from_slice(&a.data()[r * ca..(r + 1) * ca]);
        out.extend_from_slice(&b.data()[r * cb..(r + 1) * cb]);
    }
    let mut shape = ra.to_vec();
    *shape.last_mut().unwrap() = ca + cb;
    Ok(Tensor::new(&shape, out)?)
}

/// Splits the last axis at `at`.
pub(crate) fn split_last(x: &Tensor, at: usize) -> Result<(Tensor, Tensor), NnError> {
    let shape = x.shape();
    let c = shape[shape.len() - 1];
    if at == 0 || at >= c {
        return Err(NnError::Dimension(format!("cannot split last axis of {shape:?} at {at}")));
    }
    let rows = x.len() / c;
    let mut a = Vec::with_capacity(rows * at);
    let mut b = Vec::with_capacity(rows * (c - at));
    for r in 0..rows {
        a.extend_from_slice(&x.data()[r * c..r * c + at]);
        b.extend_from_slice(&x.data()[r * c + at..(r + 1) * c]);
    }
    let mut sa = shape.to_vec();
    let mut sb = shape.to_vec();
    *sa.last_mut().unwrap() = at;
    *sb.last_mut().unwrap() = c - at;
    Ok((Tensor::new(&sa, a)?, Tensor::new(&sb, b)?))
}
