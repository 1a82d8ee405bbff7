use serde::{Deserialize, Serialize};

use super::{glorot, NnError};
use crate::tensor::{Rng, Tensor};

/// Fully connected layer, `y = x·Wᵀ + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl DenseLayer {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<Self, NnError> {
        match (weights.shape(), bias.shape()) {
            ([out, _], [b]) if out == b => Ok(Self { weights, bias }),
            _ => Err(NnError::Config(format!(
                "dense: bias {:?} does not match weights {:?}",
                bias.shape(),
                weights.shape()
            ))),
        }
    }

    pub fn init(inputs: usize, outputs: usize, rng: &mut Rng) -> Result<Self, NnError> {
        let weights = glorot(rng, &[outputs, inputs], inputs, outputs)?;
        Self::new(weights, Tensor::zeros(&[outputs]))
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn params(&self) -> Vec<&Tensor> {
        vec![&self.weights, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weights, &mut self.bias]
    }

    /// Returns `(input_grad, [weights_grad, bias_grad])`.
    pub fn backward(&self, input: &Tensor, upstream: &Tensor) -> Result<(Tensor, Vec<Tensor>), NnError> {
        let dx = upstream.matmul(&self.weights)?;
        let dw = upstream.matmul_tn(input)?;
        let db = upstream.reduce(0, crate::tensor::Reduction::Sum)?;
        Ok((dx, vec![dw, db]))
    }
}

pub fn dense_forward(layer: &DenseLayer, x: &Tensor) -> Result<Tensor, NnError> {
    if x.rank() != 2 || x.shape()[1] != layer.inputs() {
        return Err(NnError::Dimension(format!(
            "dense expects [batch x {}], got {:?}",
            layer.inputs(),
            x.shape()
        )));
    }
    Ok(x.matmul_nt(&layer.weights)?.add_row(&layer.bias)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_pass_through() {
        let layer = DenseLayer::new(Tensor::identity(3), Tensor::zeros(&[3])).unwrap();
        let x = Tensor::from_rows(&[vec![1.0, -2.0, 3.5], vec![0.0, 4.0, 1.0]]).unwrap();
        assert_eq!(dense_forward(&layer, &x).unwrap(), x);
    }

    #[test]
    fn zero_input_yields_bias_rows() {
        let layer = DenseLayer::new(Tensor::ones(&[2, 3]), Tensor::vector(&[0.5, -1.0]).unwrap()).unwrap();
        let y = dense_forward(&layer, &Tensor::zeros(&[4, 3])).unwrap();
        assert_eq!(y.shape(), &[4, 2]);
        for row in y.data().chunks(2) {
            assert_eq!(row, &[0.5, -1.0]);
        }
    }

    #[test]
    fn hand_example() {
        let w = Tensor::from_rows(&[vec![2.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let layer = DenseLayer::new(w, Tensor::vector(&[1.0, 0.0]).unwrap()).unwrap();
        let x = Tensor::from_rows(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(dense_forward(&layer, &x).unwrap().data(), &[7.0, 7.0]);
    }

    #[test]
    fn input_grad_is_upstream_times_weights() {
        let w = Tensor::from_rows(&[vec![2.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let layer = DenseLayer::new(w.clone(), Tensor::zeros(&[2])).unwrap();
        let x = Tensor::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let up = Tensor::from_rows(&[vec![1.0, -1.0]]).unwrap();
        let (dx, _) = layer.backward(&x, &up).unwrap();
        assert_eq!(dx, up.matmul(&w).unwrap());
    }

    #[test]
    fn mismatched_input_rejected() {
        let layer = DenseLayer::new(Tensor::identity(3), Tensor::zeros(&[3])).unwrap();
        assert!(dense_forward(&layer, &Tensor::zeros(&[2, 2])).is_err());
        assert!(DenseLayer::new(Tensor::identity(3), Tensor::zeros(&[2])).is_err());
    }
}
