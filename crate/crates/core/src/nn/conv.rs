use serde::{Deserialize, Serialize};

use super::{glorot, NnError};
use crate::tensor::{Rng, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Valid,
    /// Zero padding that preserves length; for even kernels the extra zero goes on the right.
    #[default]
    Same,
}

/// 1-D cross-correlation over `[batch x channels x length]` inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1dLayer {
    /// `[filters x in_channels x kernel]`
    pub kernels: Tensor,
    pub bias: Tensor,
    pub padding: Padding,
}

impl Conv1dLayer {
    pub fn new(kernels: Tensor, bias: Tensor, padding: Padding) -> Result<Self, NnError> {
        match (kernels.shape(), bias.shape()) {
            ([f, _, _], [b]) if f == b => Ok(Self { kernels, bias, padding }),
            _ => Err(NnError::Config(format!(
                "conv1d: kernels {:?} / bias {:?} inconsistent",
                kernels.shape(),
                bias.shape()
            ))),
        }
    }

    pub fn init(channels: usize, filters: usize, kernel: usize, padding: Padding, rng: &mut Rng) -> Result<Self, NnError> {
        let k = glorot(rng, &[filters, channels, kernel], channels * kernel, filters * kernel)?;
        Self::new(k, Tensor::zeros(&[filters]), padding)
    }

    pub fn filters(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.kernels.shape()[2]
    }

    fn left_pad(&self) -> usize {
        match self.padding {
            Padding::Valid => 0,
            Padding::Same => (self.kernel() - 1) / 2,
        }
    }

    pub fn output_len(&self, len: usize) -> Option<usize> {
        match self.padding {
            Padding::Same => Some(len),
            Padding::Valid => len.checked_sub(self.kernel()).map(|d| d + 1),
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        vec![&self.kernels, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.kernels, &mut self.bias]
    }

    fn dims(&self, x: &Tensor) -> Result<(usize, usize, usize), NnError> {
        match x.shape() {
            &[b, c, l] if c == self.channels() => {
                let out = self.output_len(l).ok_or_else(|| {
                    NnError::Dimension(format!("conv1d: length {l} shorter than kernel {} with valid padding", self.kernel()))
                })?;
                Ok((b, l, out))
            }
            s => Err(NnError::Dimension(format!(
                "conv1d expects [batch x {} x length], got {s:?}",
                self.channels()
            ))),
        }
    }

    /// Returns `(input_grad, [kernels_grad, bias_grad])`.
    pub fn backward(&self, input: &Tensor, upstream: &Tensor) -> Result<(Tensor, Vec<Tensor>), NnError> {
        let (batch, len, out_len) = self.dims(input)?;
        let (f_n, c_n, k_n) = (self.filters(), self.channels(), self.kernel());
        if upstream.shape() != [batch, f_n, out_len] {
            return Err(NnError::Dimension(format!(
                "conv1d backward: upstream {:?} vs expected {:?}",
                upstream.shape(),
                [batch, f_n, out_len]
            )));
        }
        let pad = self.left_pad() as isize;
        let x = input.data();
        let w = self.kernels.data();
        let dy = upstream.data();
        let mut dx = vec![0.0; x.len()];
        let mut dw = vec![0.0; w.len()];
        let mut db = vec![0.0; f_n];
        for b in 0..batch {
            for f in 0..f_n {
                let dyr = &dy[(b * f_n + f) * out_len..(b * f_n + f + 1) * out_len];
                db[f] += dyr.iter().sum::<f64>();
                for c in 0..c_n {
                    let xr = &x[(b * c_n + c) * len..(b * c_n + c + 1) * len];
                    let dxr = &mut dx[(b * c_n + c) * len..(b * c_n + c + 1) * len];
                    for j in 0..k_n {
                        let wi = (f * c_n + c) * k_n + j;
                        let wv = w[wi];
                        let mut acc = 0.0;
                        for (t, &g) in dyr.iter().enumerate() {
                            let src = t as isize + j as isize - pad;
                            if src >= 0 && (src as usize) < len {
                                acc += g * xr[src as usize];
                                dxr[src as usize] += g * wv;
                            }
                        }
                        dw[wi] += acc;
                    }
                }
            }
        }
        Ok((
            Tensor::new(input.shape(), dx)?,
            vec![Tensor::new(self.kernels.shape(), dw)?, Tensor::new(&[f_n], db)?],
        ))
    }
}

/// Cross-correlation plus bias; no activation.
pub fn conv1d_forward(layer: &Conv1dLayer, x: &Tensor) -> Result<Tensor, NnError> {
    let (batch, len, out_len) = layer.dims(x)?;
    let (f_n, c_n, k_n) = (layer.filters(), layer.channels(), layer.kernel());
    let pad = layer.left_pad() as isize;
    let xd = x.data();
    let w = layer.kernels.data();
    let mut out = vec![0.0; batch * f_n * out_len];
    for b in 0..batch {
        for f in 0..f_n {
            let yr = &mut out[(b * f_n + f) * out_len..(b * f_n + f + 1) * out_len];
            yr.fill(layer.bias.data()[f]);
            for c in 0..c_n {
                let xr = &xd[(b * c_n + c) * len..(b * c_n + c + 1) * len];
                for j in 0..k_n {
                    let wv = w[(f * c_n + c) * k_n + j];
                    let shift = j as isize - pad;
                    let t_lo = (-shift).max(0) as usize;
                    let t_hi = ((len as isize - shift).min(out_len as isize)).max(0) as usize;
                    for t in t_lo..t_hi {
                        yr[t] += wv * xr[(t as isize + shift) as usize];
                    }
                }
            }
        }
    }
    Ok(Tensor::new(&[batch, f_n, out_len], out)?)
}
