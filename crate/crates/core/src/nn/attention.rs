use serde::{Deserialize, Serialize};

use super::{glorot, NnError};
use crate::tensor::{Rng, Tensor};

/// Single-head scaled dot-product self-attention with learned query, key and
/// value projections (no biases): `softmax(Q Kᵀ / √d) V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfAttention {
    pub w_q: Tensor,
    pub w_k: Tensor,
    pub w_v: Tensor,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    x_flat: Tensor,
    q: Tensor,
    k: Tensor,
    v: Tensor,
    /// `[batch x steps x steps]`
    weights: Tensor,
    batch: usize,
    steps: usize,
}

impl AttentionCache {
    pub fn weights(&self) -> &Tensor {
        &self.weights
    }
}

fn block(t: &Tensor, b: usize, rows: usize) -> Tensor {
    let cols = t.shape()[1];
    Tensor::new(&[rows, cols], t.data()[b * rows * cols..(b + 1) * rows * cols].to_vec()).expect("finite block")
}

impl SelfAttention {
    pub fn new(w_q: Tensor, w_k: Tensor, w_v: Tensor) -> Result<Self, NnError> {
        let d = w_q.shape()[0];
        if [&w_q, &w_k, &w_v].iter().any(|w| w.shape() != [d, d]) {
            return Err(NnError::Config("attention projections must all be [d x d]".into()));
        }
        Ok(Self { w_q, w_k, w_v })
    }

    pub fn init(d: usize, rng: &mut Rng) -> Result<Self, NnError> {
        if d == 0 {
            return Err(NnError::Config("attention model width must be positive".into()));
        }
        Self::new(glorot(rng, &[d, d], d, d)?, glorot(rng, &[d, d], d, d)?, glorot(rng, &[d, d], d, d)?)
    }

    pub fn width(&self) -> usize {
        self.w_q.shape()[0]
    }

    pub fn params(&self) -> Vec<&Tensor> {
        vec![&self.w_q, &self.w_k, &self.w_v]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w_q, &mut self.w_k, &mut self.w_v]
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, AttentionCache), NnError> {
        let d = self.width();
        let &[batch, steps, dx] = x.shape() else {
            return Err(NnError::Dimension(format!("attention expects [batch x steps x {d}], got {:?}", x.shape())));
        };
        if dx != d {
            return Err(NnError::Dimension(format!("attention expects width {d}, got {dx}")));
        }
        let x_flat = x.reshape(&[batch * steps, d])?;
        let q = x_flat.matmul_nt(&self.w_q)?;
        let k = x_flat.matmul_nt(&self.w_k)?;
        let v = x_flat.matmul_nt(&self.w_v)?;
        let scale = 1.0 / (d as f64).sqrt();
        let mut out = Vec::with_capacity(batch * steps * d);
        let mut weights = Vec::with_capacity(batch * steps * steps);
        for b in 0..batch {
            let (qb, kb, vb) = (block(&q, b, steps), block(&k, b, steps), block(&v, b, steps));
            let scores = qb.matmul_nt(&kb)?.scale(scale)?;
            let a = softmax_rows(&scores)?;
            out.extend_from_slice(a.matmul(&vb)?.data());
            weights.extend_from_slice(a.data());
        }
        let cache = AttentionCache {
            x_flat,
            q,
            k,
            v,
            weights: Tensor::new(&[batch, steps, steps], weights)?,
            batch,
            steps,
        };
        Ok((Tensor::new(&[batch, steps, d], out)?, cache))
    }

    pub fn backward(&self, cache: &AttentionCache, upstream: &Tensor) -> Result<(Tensor, Vec<Tensor>), NnError> {
        let (batch, steps, d) = (cache.batch, cache.steps, self.width());
        if upstream.shape() != [batch, steps, d] {
            return Err(NnError::StaleCache(format!(
                "attention: upstream {:?} vs cached [{batch}, {steps}, {d}]",
                upstream.shape()
            )));
        }
        let scale = 1.0 / (d as f64).sqrt();
        let d_out = upstream.reshape(&[batch * steps, d])?;
        let (mut dq, mut dk, mut dv) = (Vec::new(), Vec::new(), Vec::new());
        for b in 0..batch {
            let a = Tensor::new(&[steps, steps], cache.weights.data()[b * steps * steps..(b + 1) * steps * steps].to_vec())?;
            let go = block(&d_out, b, steps);
            let (qb, kb, vb) = (block(&cache.q, b, steps), block(&cache.k, b, steps), block(&cache.v, b, steps));
            let da = go.matmul_nt(&vb)?;
            dv.extend_from_slice(a.matmul_tn(&go)?.data());
            let mut ds = vec![0.0; steps * steps];
            for i in 0..steps {
                let ar = &a.data()[i * steps..(i + 1) * steps];
                let dar = &da.data()[i * steps..(i + 1) * steps];
                let dot: f64 = ar.iter().zip(dar).map(|(x, y)| x * y).sum();
                for j in 0..steps {
                    ds[i * steps + j] = ar[j] * (dar[j] - dot) * scale;
                }
            }
            let ds = Tensor::new(&[steps, steps], ds)?;
            dq.extend_from_slice(ds.matmul(&kb)?.data());
            dk.extend_from_slice(ds.matmul_tn(&qb)?.data());
        }
        let shape = [batch * steps, d];
        let (dq, dk, dv) = (Tensor::new(&shape, dq)?, Tensor::new(&shape, dk)?, Tensor::new(&shape, dv)?);
        let mut dx = dq.matmul(&self.w_q)?;
        dx.add_assign(&dk.matmul(&self.w_k)?)?;
        dx.add_assign(&dv.matmul(&self.w_v)?)?;
        let grads = vec![
            dq.matmul_tn(&cache.x_flat)?,
            dk.matmul_tn(&cache.x_flat)?,
            dv.matmul_tn(&cache.x_flat)?,
        ];
        Ok((dx.reshape(&[batch, steps, d])?, grads))
    }
}

/// Row-wise softmax of a rank-2 tensor, shifted by the row max.
pub fn softmax_rows(s: &Tensor) -> Result<Tensor, NnError> {
    let cols = s.shape()[s.rank() - 1];
    let mut out = s.data().to_vec();
    for row in out.chunks_mut(cols) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
    Ok(Tensor::new(s.shape(), out)?)
}

/// Returns the attended sequence and the `[batch x steps x steps]` weights.
pub fn self_attention_forward(params: &SelfAttention, x: &Tensor) -> Result<(Tensor, Tensor), NnError> {
    let (out, cache) = params.forward(x)?;
    Ok((out, cache.weights))
}
