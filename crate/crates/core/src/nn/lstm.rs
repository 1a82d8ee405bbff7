//! Long short-term memory cell (input/forget/output gates plus a tanh
//! candidate), and the bidirectional wrapper.

use serde::{Deserialize, Serialize};

use super::activation::sigmoid;
use super::seq::{concat_last, gather_step, scatter_step, seq_dims, SequenceCell};
use super::{glorot, NnError};
use crate::tensor::{Reduction, Rng, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCell {
    pub w_i: Tensor,
    pub w_f: Tensor,
    pub w_o: Tensor,
    pub w_g: Tensor,
    pub u_i: Tensor,
    pub u_f: Tensor,
    pub u_o: Tensor,
    pub u_g: Tensor,
    pub b_i: Tensor,
    pub b_f: Tensor,
    pub b_o: Tensor,
    pub b_g: Tensor,
}

#[derive(Debug, Clone)]
pub struct LstmStepCache {
    pub x: Tensor,
    pub h_prev: Tensor,
    pub c_prev: Tensor,
    pub i: Tensor,
    pub f: Tensor,
    pub o: Tensor,
    pub g: Tensor,
    pub c: Tensor,
}

struct StepGrads {
    a: [Tensor; 4],
    h_prev: Tensor,
    c_prev: Tensor,
}

impl LstmCell {
    /// Parameters in [`LstmCell::params`] order.
    pub fn from_params(p: Vec<Tensor>) -> Result<Self, NnError> {
        let p: [Tensor; 12] = p
            .try_into()
            .map_err(|v: Vec<Tensor>| NnError::Config(format!("lstm needs 12 parameter tensors, got {}", v.len())))?;
        let [w_i, w_f, w_o, w_g, u_i, u_f, u_o, u_g, b_i, b_f, b_o, b_g] = p;
        let cell = Self {
            w_i,
            w_f,
            w_o,
            w_g,
            u_i,
            u_f,
            u_o,
            u_g,
            b_i,
            b_f,
            b_o,
            b_g,
        };
        let [h, i] = cell.w_i.shape()[..] else {
            return Err(NnError::Config("lstm: W_i must be rank 2".into()));
        };
        let ok = cell.ws().iter().all(|w| w.shape() == [h, i])
            && cell.us().iter().all(|u| u.shape() == [h, h])
            && cell.bs().iter().all(|b| b.shape() == [h]);
        if !ok {
            return Err(NnError::Config(format!("lstm: parameters inconsistent with input {i}, hidden {h}")));
        }
        Ok(cell)
    }

    pub fn init(input: usize, hidden: usize, rng: &mut Rng) -> Result<Self, NnError> {
        let mut p = Vec::with_capacity(12);
        for _ in 0..4 {
            p.push(glorot(rng, &[hidden, input], input, hidden)?);
        }
        for _ in 0..4 {
            p.push(glorot(rng, &[hidden, hidden], hidden, hidden)?);
        }
        for _ in 0..4 {
            p.push(Tensor::zeros(&[hidden]));
        }
        Self::from_params(p)
    }

    fn ws(&self) -> [&Tensor; 4] {
        [&self.w_i, &self.w_f, &self.w_o, &self.w_g]
    }

    fn us(&self) -> [&Tensor; 4] {
        [&self.u_i, &self.u_f, &self.u_o, &self.u_g]
    }

    fn bs(&self) -> [&Tensor; 4] {
        [&self.b_i, &self.b_f, &self.b_o, &self.b_g]
    }

    pub fn input_size(&self) -> usize {
        self.w_i.shape()[1]
    }

    pub fn hidden_size(&self) -> usize {
        self.w_i.shape()[0]
    }

    /// Order: `w_i, w_f, w_o, w_g, u_i, u_f, u_o, u_g, b_i, b_f, b_o, b_g`.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut v: Vec<&Tensor> = self.ws().to_vec();
        v.extend(self.us());
        v.extend(self.bs());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.w_i,
            &mut self.w_f,
            &mut self.w_o,
            &mut self.w_g,
            &mut self.u_i,
            &mut self.u_f,
            &mut self.u_o,
            &mut self.u_g,
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_g,
        ]
    }

    /// `proj` holds `x·Wᵀ` for gates i, f, o, g.
    fn step_projected(&self, proj: [Tensor; 4], x: Tensor, h_prev: &Tensor, c_prev: &Tensor) -> Result<(Tensor, LstmStepCache), NnError> {
        let pre = |k: usize, p: &Tensor| -> Result<Tensor, NnError> {
            Ok(p.add(&h_prev.matmul_nt(self.us()[k])?)?.add_row(self.bs()[k])?)
        };
        let [pi, pf, po, pg] = proj;
        let i = pre(0, &pi)?.map(sigmoid)?;
        let f = pre(1, &pf)?.map(sigmoid)?;
        let o = pre(2, &po)?.map(sigmoid)?;
        let g = pre(3, &pg)?.map(f64::tanh)?;
        let c = f.mul(c_prev)?.add(&i.mul(&g)?)?;
        let h = o.mul(&c.map(f64::tanh)?)?;
        Ok((
            h,
            LstmStepCache {
                x,
                h_prev: h_prev.clone(),
                c_prev: c_prev.clone(),
                i,
                f,
                o,
                g,
                c,
            },
        ))
    }

    fn step_grads(&self, k: &LstmStepCache, dh: &Tensor, dc_in: &Tensor) -> Result<StepGrads, NnError> {
        let n = dh.len();
        let shape = dh.shape();
        let (i, f, o, g, c, cp) = (k.i.data(), k.f.data(), k.o.data(), k.g.data(), k.c.data(), k.c_prev.data());
        let (dhd, dcd) = (dh.data(), dc_in.data());
        let mut a = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut dc_prev = vec![0.0; n];
        for j in 0..n {
            let tc = c[j].tanh();
            let d_o = dhd[j] * tc;
            let dc = dcd[j] + dhd[j] * o[j] * (1.0 - tc * tc);
            a[0][j] = dc * g[j] * i[j] * (1.0 - i[j]);
            a[1][j] = dc * cp[j] * f[j] * (1.0 - f[j]);
            a[2][j] = d_o * o[j] * (1.0 - o[j]);
            a[3][j] = dc * i[j] * (1.0 - g[j] * g[j]);
            dc_prev[j] = dc * f[j];
        }
        let [a0, a1, a2, a3] = a;
        let a = [
            Tensor::new(shape, a0)?,
            Tensor::new(shape, a1)?,
            Tensor::new(shape, a2)?,
            Tensor::new(shape, a3)?,
        ];
        let mut h_prev = a[0].matmul(&self.u_i)?;
        for (ak, u) in a.iter().zip(self.us()).skip(1) {
            h_prev.add_assign(&ak.matmul(u)?)?;
        }
        Ok(StepGrads {
            a,
            h_prev,
            c_prev: Tensor::new(shape, dc_prev)?,
        })
    }
}

pub fn lstm_cell_step(cell: &LstmCell, x_t: &Tensor, h_prev: &Tensor, c_prev: &Tensor) -> Result<(Tensor, Tensor, LstmStepCache), NnError> {
    match (x_t.shape(), h_prev.shape(), c_prev.shape()) {
        (&[b, i], &[b2, h], c) if b == b2 && i == cell.input_size() && h == cell.hidden_size() && c == h_prev.shape() => {}
        (xs, hs, cs) => {
            return Err(NnError::Dimension(format!(
                "lstm step expects x [batch x {}], h and c [batch x {}]; got {xs:?}, {hs:?}, {cs:?}",
                cell.input_size(),
                cell.hidden_size()
            )))
        }
    }
    let proj = [
        x_t.matmul_nt(&cell.w_i)?,
        x_t.matmul_nt(&cell.w_f)?,
        x_t.matmul_nt(&cell.w_o)?,
        x_t.matmul_nt(&cell.w_g)?,
    ];
    let (h, cache) = cell.step_projected(proj, x_t.clone(), h_prev, c_prev)?;
    Ok((h, cache.c.clone(), cache))
}

/// Backward through one step given gradients w.r.t. `h_t` and `c_t`.
/// Returns `(dx, dh_prev, dc_prev, grads)`.
pub fn lstm_cell_step_backward(
    cell: &LstmCell,
    cache: &LstmStepCache,
    dh: &Tensor,
    dc: &Tensor,
) -> Result<(Tensor, Tensor, Tensor, Vec<Tensor>), NnError> {
    if dh.shape() != cache.h_prev.shape() || dc.shape() != cache.c_prev.shape() {
        return Err(NnError::StaleCache("lstm step: upstream shape differs from cached state".into()));
    }
    let g = cell.step_grads(cache, dh, dc)?;
    let mut dx = g.a[0].matmul(&cell.w_i)?;
    for (ak, w) in g.a.iter().zip(cell.ws()).skip(1) {
        dx.add_assign(&ak.matmul(w)?)?;
    }
    let mut grads = Vec::with_capacity(12);
    for ak in &g.a {
        grads.push(ak.matmul_tn(&cache.x)?);
    }
    for ak in &g.a {
        grads.push(ak.matmul_tn(&cache.h_prev)?);
    }
    for ak in &g.a {
        grads.push(ak.reduce(0, Reduction::Sum)?);
    }
    Ok((dx, g.h_prev, g.c_prev, grads))
}

#[derive(Debug, Clone)]
pub struct LstmSequenceCache {
    x_flat: Tensor,
    batch: usize,
    steps: usize,
    reverse: bool,
    cache: Vec<LstmStepCache>,
}

impl SequenceCell for LstmCell {
    type Cache = LstmSequenceCache;

    fn seq_forward(&self, x: &Tensor, reverse: bool) -> Result<(Tensor, Tensor, Self::Cache), NnError> {
        let (batch, steps, input) = seq_dims(x, self.input_size())?;
        let hidden = self.hidden_size();
        let x_flat = x.reshape(&[batch * steps, input])?;
        let proj: Vec<Tensor> = self.ws().iter().map(|w| x_flat.matmul_nt(w)).collect::<Result<_, _>>()?;
        let mut h = Tensor::zeros(&[batch, hidden]);
        let mut c = Tensor::zeros(&[batch, hidden]);
        let mut seq = vec![0.0; batch * steps * hidden];
        let mut cache = Vec::with_capacity(steps);
        for k in 0..steps {
            let t = if reverse { steps - 1 - k } else { k };
            let p = [0, 1, 2, 3].map(|j| gather_step(&proj[j], batch, steps, t));
            let (h_new, step) = self.step_projected(p, gather_step(&x_flat, batch, steps, t), &h, &c)?;
            scatter_step(&mut seq, &h_new, batch, steps, t);
            c = step.c.clone();
            h = h_new;
            cache.push(step);
        }
        Ok((
            Tensor::new(&[batch, steps, hidden], seq)?,
            h,
            LstmSequenceCache {
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
                "lstm sequence: upstream {:?} vs cached [{batch}, {steps}, {hidden}]",
                d_seq.shape()
            )));
        }
        let d_flat = d_seq.reshape(&[batch * steps, hidden])?;
        let mut a: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; batch * steps * hidden]);
        let mut du: [Tensor; 4] = std::array::from_fn(|_| Tensor::zeros(&[hidden, hidden]));
        let mut dh_carry = Tensor::zeros(&[batch, hidden]);
        let mut dc_carry = Tensor::zeros(&[batch, hidden]);
        for k in (0..steps).rev() {
            let t = if cache.reverse { steps - 1 - k } else { k };
            let step = &cache.cache[k];
            let dh = gather_step(&d_flat, batch, steps, t).add(&dh_carry)?;
            let g = self.step_grads(step, &dh, &dc_carry)?;
            for j in 0..4 {
                du[j].add_assign(&g.a[j].matmul_tn(&step.h_prev)?)?;
                scatter_step(&mut a[j], &g.a[j], batch, steps, t);
            }
            dh_carry = g.h_prev;
            dc_carry = g.c_prev;
        }
        let a: Vec<Tensor> = a
            .into_iter()
            .map(|v| Tensor::new(&[batch * steps, hidden], v))
            .collect::<Result<_, _>>()?;
        let mut dx = a[0].matmul(&self.w_i)?;
        for (ak, w) in a.iter().zip(self.ws()).skip(1) {
            dx.add_assign(&ak.matmul(w)?)?;
        }
        let mut grads = Vec::with_capacity(12);
        for ak in &a {
            grads.push(ak.matmul_tn(&cache.x_flat)?);
        }
        grads.extend(du);
        for ak in &a {
            grads.push(ak.reduce(0, Reduction::Sum)?);
        }
        Ok((dx.reshape(&[batch, steps, self.input_size()])?, grads))
    }
}

/// Forward LSTM over `x` concatenated with a second LSTM run over the
/// reversed sequence (re-aligned to original positions):
/// `[batch x steps x 2*hidden]`.
pub fn bilstm_forward(forward: &LstmCell, backward: &LstmCell, x: &Tensor) -> Result<Tensor, NnError> {
    if forward.hidden_size() != backward.hidden_size() {
        return Err(NnError::Config(format!(
            "bilstm: hidden sizes differ ({} vs {})",
            forward.hidden_size(),
            backward.hidden_size()
        )));
    }
    let (fs, _, _) = forward.seq_forward(x, false)?;
    let (bs, _, _) = backward.seq_forward(x, true)?;
    concat_last(&fs, &bs)
}
