//! Gated recurrent unit.
//!
//! For input `x_t` and previous state `h_{t-1}`:
//!
//! ```text
//! z_t = σ(W_z x_t + U_z h_{t-1} + b_z)           update gate
//! r_t = σ(W_r x_t + U_r h_{t-1} + b_r)           reset gate
//! c_t = tanh(W_h x_t + U_h (r_t ⊙ h_{t-1}) + b_h) candidate state
//! h_t = (1 − z_t) ⊙ h_{t-1} + z_t ⊙ c_t
//! ```
//!
//! The reset gate scales the recurrent contribution to the candidate.

use serde::{Deserialize, Serialize};

use super::activation::sigmoid;
use super::seq::{gather_step, scatter_step, seq_dims, SequenceCell};
use super::{glorot, NnError};
use crate::tensor::{Reduction, Rng, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruCell {
    pub w_z: Tensor,
    pub w_r: Tensor,
    pub w_h: Tensor,
    pub u_z: Tensor,
    pub u_r: Tensor,
    pub u_h: Tensor,
    pub b_z: Tensor,
    pub b_r: Tensor,
    pub b_h: Tensor,
}

/// Intermediates of one step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GruStepCache {
    pub x: Tensor,
    pub h_prev: Tensor,
    pub z: Tensor,
    pub r: Tensor,
    pub candidate: Tensor,
}

/// Gradients of one step with respect to its pre-activations.
struct StepGrads {
    a_z: Tensor,
    a_r: Tensor,
    a_c: Tensor,
    h_prev: Tensor,
}

impl GruCell {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        w_z: Tensor,
        w_r: Tensor,
        w_h: Tensor,
        u_z: Tensor,
        u_r: Tensor,
        u_h: Tensor,
        b_z: Tensor,
        b_r: Tensor,
        b_h: Tensor,
    ) -> Result<Self, NnError> {
        let cell = Self {
            w_z,
            w_r,
            w_h,
            u_z,
            u_r,
            u_h,
            b_z,
            b_r,
            b_h,
        };
        cell.validate()?;
        Ok(cell)
    }

    fn validate(&self) -> Result<(), NnError> {
        let [h, i] = self.w_z.shape()[..] else {
            return Err(NnError::Config("gru: W_z must be rank 2".into()));
        };
        let ok = [&self.w_z, &self.w_r, &self.w_h].iter().all(|w| w.shape() == [h, i])
            && [&self.u_z, &self.u_r, &self.u_h].iter().all(|u| u.shape() == [h, h])
            && [&self.b_z, &self.b_r, &self.b_h].iter().all(|b| b.shape() == [h]);
        if ok {
            Ok(())
        } else {
            Err(NnError::Config(format!("gru: parameters inconsistent with input {i}, hidden {h}")))
        }
    }

    /// Glorot-scaled weights, zero biases.
    pub fn init(input: usize, hidden: usize, rng: &mut Rng) -> Result<Self, NnError> {
        let mut w = || glorot(rng, &[hidden, input], input, hidden);
        let (w_z, w_r, w_h) = (w()?, w()?, w()?);
        let mut u = || glorot(rng, &[hidden, hidden], hidden, hidden);
        let (u_z, u_r, u_h) = (u()?, u()?, u()?);
        let b = || Tensor::zeros(&[hidden]);
        Self::new(w_z, w_r, w_h, u_z, u_r, u_h, b(), b(), b())
    }

    pub fn input_size(&self) -> usize {
        self.w_z.shape()[1]
    }

    pub fn hidden_size(&self) -> usize {
        self.w_z.shape()[0]
    }

    /// Order: `w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h`.
    pub fn params(&self) -> Vec<&Tensor> {
        vec![
            &self.w_z, &self.w_r, &self.w_h, &self.u_z, &self.u_r, &self.u_h, &self.b_z, &self.b_r, &self.b_h,
        ]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_h,
            &mut self.u_z,
            &mut self.u_r,
            &mut self.u_h,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }

    /// One step given precomputed input projections `x·Wᵀ` for each gate.
    fn step_projected(&self, pz: &Tensor, pr: &Tensor, ph: &Tensor, h_prev: &Tensor) -> Result<(Tensor, Tensor, Tensor, Tensor), NnError> {
        let az = pz.add(&h_prev.matmul_nt(&self.u_z)?)?.add_row(&self.b_z)?;
        let ar = pr.add(&h_prev.matmul_nt(&self.u_r)?)?.add_row(&self.b_r)?;
        let z = az.map(sigmoid)?;
        let r = ar.map(sigmoid)?;
        let rh = r.mul(h_prev)?;
        let ac = ph.add(&rh.matmul_nt(&self.u_h)?)?.add_row(&self.b_h)?;
        let c = ac.map(f64::tanh)?;
        let h = {
            let data = z
                .data()
                .iter()
                .zip(h_prev.data())
                .zip(c.data())
                .map(|((&zv, &hv), &cv)| (1.0 - zv) * hv + zv * cv)
                .collect();
            Tensor::new(h_prev.shape(), data)?
        };
        Ok((h, z, r, c))
    }

    fn step_grads(&self, cache: &GruStepCache, dh: &Tensor) -> Result<StepGrads, NnError> {
        let n = dh.len();
        let (z, r, c, hp, g) = (cache.z.data(), cache.r.data(), cache.candidate.data(), cache.h_prev.data(), dh.data());
        let mut a_z = vec![0.0; n];
        let mut a_c = vec![0.0; n];
        let mut dh_prev = vec![0.0; n];
        for i in 0..n {
            a_z[i] = g[i] * (c[i] - hp[i]) * z[i] * (1.0 - z[i]);
            a_c[i] = g[i] * z[i] * (1.0 - c[i] * c[i]);
            dh_prev[i] = g[i] * (1.0 - z[i]);
        }
        let shape = dh.shape();
        let a_z = Tensor::new(shape, a_z)?;
        let a_c = Tensor::new(shape, a_c)?;
        // gradient reaching r ⊙ h_prev through U_h
        let d_rh = a_c.matmul(&self.u_h)?;
        let mut a_r = vec![0.0; n];
        for i in 0..n {
            a_r[i] = d_rh.data()[i] * hp[i] * r[i] * (1.0 - r[i]);
            dh_prev[i] += d_rh.data()[i] * r[i];
        }
        let a_r = Tensor::new(shape, a_r)?;
        let mut h_prev = Tensor::new(shape, dh_prev)?;
        h_prev.add_assign(&a_z.matmul(&self.u_z)?)?;
        h_prev.add_assign(&a_r.matmul(&self.u_r)?)?;
        Ok(StepGrads { a_z, a_r, a_c, h_prev })
    }

    fn check_step_dims(&self, x: &Tensor, h: &Tensor) -> Result<(), NnError> {
        match (x.shape(), h.shape()) {
            (&[b1, i], &[b2, hh]) if b1 == b2 && i == self.input_size() && hh == self.hidden_size() => Ok(()),
            (xs, hs) => Err(NnError::Dimension(format!(
                "gru step expects x [batch x {}] and h [batch x {}], got {xs:?} and {hs:?}",
                self.input_size(),
                self.hidden_size()
            ))),
        }
    }
}

/// One GRU update on a batch: `x_t [batch x input]`, `h_prev [batch x hidden]`.
pub fn gru_cell_step(cell: &GruCell, x_t: &Tensor, h_prev: &Tensor) -> Result<(Tensor, GruStepCache), NnError> {
    cell.check_step_dims(x_t, h_prev)?;
    let pz = x_t.matmul_nt(&cell.w_z)?;
    let pr = x_t.matmul_nt(&cell.w_r)?;
    let ph = x_t.matmul_nt(&cell.w_h)?;
    let (h, z, r, candidate) = cell.step_projected(&pz, &pr, &ph, h_prev)?;
    let cache = GruStepCache {
        x: x_t.clone(),
        h_prev: h_prev.clone(),
        z,
        r,
        candidate,
    };
    Ok((h, cache))
}

/// Backward through one step. Returns `(dx, dh_prev, grads)` with grads in
/// [`GruCell::params`] order.
pub fn gru_cell_step_backward(cell: &GruCell, cache: &GruStepCache, dh: &Tensor) -> Result<(Tensor, Tensor, Vec<Tensor>), NnError> {
    if dh.shape() != cache.h_prev.shape() {
        return Err(NnError::StaleCache(format!(
            "gru step: upstream {:?} vs state {:?}",
            dh.shape(),
            cache.h_prev.shape()
        )));
    }
    let g = cell.step_grads(cache, dh)?;
    let rh = cache.r.mul(&cache.h_prev)?;
    let mut dx = g.a_z.matmul(&cell.w_z)?;
    dx.add_assign(&g.a_r.matmul(&cell.w_r)?)?;
    dx.add_assign(&g.a_c.matmul(&cell.w_h)?)?;
    let grads = vec![
        g.a_z.matmul_tn(&cache.x)?,
        g.a_r.matmul_tn(&cache.x)?,
        g.a_c.matmul_tn(&cache.x)?,
        g.a_z.matmul_tn(&cache.h_prev)?,
        g.a_r.matmul_tn(&cache.h_prev)?,
        g.a_c.matmul_tn(&rh)?,
        g.a_z.reduce(0, Reduction::Sum)?,
        g.a_r.reduce(0, Reduction::Sum)?,
        g.a_c.reduce(0, Reduction::Sum)?,
    ];
    Ok((dx, g.h_prev, grads))
}

#[derive(Debug, Clone)]
pub struct GruSequenceCache {
    /// Input flattened to `[(batch*steps) x input]`.
    x_flat: Tensor,
    batch: usize,
    steps: usize,
    reverse: bool,
    /// Per processed step, in processing order.
    cache: Vec<GruStepCache>,
}

impl SequenceCell for GruCell {
    type Cache = GruSequenceCache;

    fn seq_forward(&self, x: &Tensor, reverse: bool) -> Result<(Tensor, Tensor, Self::Cache), NnError> {
        let (batch, steps, input) = seq_dims(x, self.input_size())?;
        let hidden = self.hidden_size();
        let x_flat = x.reshape(&[batch * steps, input])?;
        let pz = x_flat.matmul_nt(&self.w_z)?;
        let pr = x_flat.matmul_nt(&self.w_r)?;
        let ph = x_flat.matmul_nt(&self.w_h)?;
        let mut h = Tensor::zeros(&[batch, hidden]);
        let mut seq = vec![0.0; batch * steps * hidden];
        let mut cache = Vec::with_capacity(steps);
        for k in 0..steps {
            let t = if reverse { steps - 1 - k } else { k };
            let (h_new, z, r, candidate) = self.step_projected(
                &gather_step(&pz, batch, steps, t),
                &gather_step(&pr, batch, steps, t),
                &gather_step(&ph, batch, steps, t),
                &h,
            )?;
            scatter_step(&mut seq, &h_new, batch, steps, t);
            cache.push(GruStepCache {
                x: gather_step(&x_flat, batch, steps, t),
                h_prev: h,
                z,
                r,
                candidate,
            });
            h = h_new;
        }
        let seq = Tensor::new(&[batch, steps, hidden], seq)?;
        Ok((
            seq,
            h,
            GruSequenceCache {
                x_flat,
                batch,
                steps,
                reverse,
                cache,
            },
        ))
    }

    fn seq_backward(&self, cache: &Self::Cache, d_seq: &Tensor) -> Result<(Tensor, Vec<Tensor>), NnError> {
        let (batch, steps, hidden) = (cache.batch, cache.steps, self.hidden_size());
        if d_seq.shape() != [batch, steps, hidden] {
            return Err(NnError::StaleCache(format!(
                "gru sequence: upstream {:?} vs cached [{batch}, {steps}, {hidden}]",
                d_seq.shape()
            )));
        }
        let d_flat = d_seq.reshape(&[batch * steps, hidden])?;
        let mut a_z = vec![0.0; batch * steps * hidden];
        let mut a_r = a_z.clone();
        let mut a_c = a_z.clone();
        let mut du_z = Tensor::zeros(&[hidden, hidden]);
        let mut du_r = Tensor::zeros(&[hidden, hidden]);
        let mut du_h = Tensor::zeros(&[hidden, hidden]);
        let mut carry = Tensor::zeros(&[batch, hidden]);
        for k in (0..steps).rev() {
            let t = if cache.reverse { steps - 1 - k } else { k };
            let step = &cache.cache[k];
            let dh = gather_step(&d_flat, batch, steps, t).add(&carry)?;
            let g = self.step_grads(step, &dh)?;
            du_z.add_assign(&g.a_z.matmul_tn(&step.h_prev)?)?;
            du_r.add_assign(&g.a_r.matmul_tn(&step.h_prev)?)?;
            du_h.add_assign(&g.a_c.matmul_tn(&step.r.mul(&step.h_prev)?)?)?;
            scatter_step(&mut a_z, &g.a_z, batch, steps, t);
            scatter_step(&mut a_r, &g.a_r, batch, steps, t);
            scatter_step(&mut a_c, &g.a_c, batch, steps, t);
            carry = g.h_prev;
        }
        let shape = [batch * steps, hidden];
        let a_z = Tensor::new(&shape, a_z)?;
        let a_r = Tensor::new(&shape, a_r)?;
        let a_c = Tensor::new(&shape, a_c)?;
        let mut dx = a_z.matmul(&self.w_z)?;
        dx.add_assign(&a_r.matmul(&self.w_r)?)?;
        dx.add_assign(&a_c.matmul(&self.w_h)?)?;
        let dx = dx.reshape(&[batch, steps, self.input_size()])?;
        let grads = vec![
            a_z.matmul_tn(&cache.x_flat)?,
            a_r.matmul_tn(&cache.x_flat)?,
            a_c.matmul_tn(&cache.x_flat)?,
            du_z,
            du_r,
            du_h,
            a_z.reduce(0, Reduction::Sum)?,
            a_r.reduce(0, Reduction::Sum)?,
            a_c.reduce(0, Reduction::Sum)?,
        ];
        Ok((dx, grads))
    }
}

/// Hidden states of a GRU over `x [batch x steps x features]` from a zero
/// initial state. Returns `(hidden_sequence [batch x steps x hidden], final_state)`.
pub fn gru_sequence_forward(cell: &GruCell, x: &Tensor) -> Result<(Tensor, Tensor), NnError> {
    let (seq, last, _) = cell.seq_forward(x, false)?;
    Ok((seq, last))
}

/// Stacked GRU: layer `ℓ` consumes layer `ℓ-1`'s hidden sequence.
pub fn gru_stack_forward(cells: &[GruCell], x: &Tensor) -> Result<(Tensor, Tensor), NnError> {
    let (first, rest) = cells
        .split_first()
        .ok_or_else(|| NnError::Config("gru stack needs at least one cell".into()))?;
    let (mut seq, mut last) = gru_sequence_forward(first, x)?;
    for cell in rest {
        (seq, last) = gru_sequence_forward(cell, &seq)?;
    }
    Ok((seq, last))
}
