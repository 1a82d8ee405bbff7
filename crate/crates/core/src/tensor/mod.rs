//! Dense row-major `f64` arrays.
//!
//! Every operation validates shapes and refuses to produce non-finite values:
//! a NaN or infinity anywhere is reported as [`TensorError::NonFinite`]
//! instead of being carried into later computations.

mod rng;

pub use rng::{rng_normal, rng_uniform, Rng};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("invalid shape {shape:?} for {len} elements")]
    InvalidShape { shape: Vec<usize>, len: usize },
    #[error("{op}: non-finite value produced or consumed")]
    NonFinite { op: &'static str },
    #[error("axis {axis} out of range for rank {rank}")]
    InvalidAxis { axis: usize, rank: usize },
    #[error("{0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Sum,
    Mean,
    Max,
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

fn all_finite(data: &[f64]) -> bool {
    data.iter().all(|v| v.is_finite())
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self, TensorError> {
        if shape.is_empty() || shape.contains(&0) || shape.iter().product::<usize>() != data.len() {
            return Err(TensorError::InvalidShape {
                shape: shape.to_vec(),
                len: data.len(),
            });
        }
        if !all_finite(&data) {
            return Err(TensorError::NonFinite { op: "new" });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Rank-1 tensor over `values`.
    pub fn vector(values: &[f64]) -> Result<Self, TensorError> {
        Self::new(&[values.len()], values.to_vec())
    }

    /// Rank-2 tensor from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, TensorError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(TensorError::InvalidParameter("ragged rows".into()));
        }
        Self::new(&[rows.len(), cols], rows.concat())
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        assert!(n > 0 && value.is_finite(), "full: bad shape or value");
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Raw mutable access for optimizers and gradient checks. Callers are
    /// responsible for keeping values finite.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn ensure_finite(&self, op: &'static str) -> Result<(), TensorError> {
        if all_finite(&self.data) {
            Ok(())
        } else {
            Err(TensorError::NonFinite { op })
        }
    }

    fn checked(shape: Vec<usize>, data: Vec<f64>, op: &'static str) -> Result<Self, TensorError> {
        if !all_finite(&data) {
            return Err(TensorError::NonFinite { op });
        }
        Ok(Self { shape, data })
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self, TensorError> {
        if shape.iter().product::<usize>() != self.data.len() || shape.contains(&0) {
            return Err(TensorError::InvalidShape {
                shape: shape.to_vec(),
                len: self.data.len(),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    fn dims2(&self, op: &'static str) -> Result<(usize, usize), TensorError> {
        match self.shape[..] {
            [m, n] => Ok((m, n)),
            _ => Err(TensorError::ShapeMismatch {
                op,
                left: self.shape.clone(),
                right: vec![],
            }),
        }
    }

    /// `self[m×k] · other[k×n]`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        let (m, k) = self.dims2("matmul")?;
        let (k2, n) = other.dims2("matmul")?;
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let b = &other.data[p * n..(p + 1) * n];
                for (o, &bv) in row.iter_mut().zip(b) {
                    *o += a * bv;
                }
            }
        }
        Self::checked(vec![m, n], out, "matmul")
    }

    /// `self[m×k] · other[n×k]ᵀ`.
    pub fn matmul_nt(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        let (m, k) = self.dims2("matmul_nt")?;
        let (n, k2) = other.dims2("matmul_nt")?;
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul_nt",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let a = &self.data[i * k..(i + 1) * k];
            for j in 0..n {
                let b = &other.data[j * k..(j + 1) * k];
                out[i * n + j] = a.iter().zip(b).map(|(x, y)| x * y).sum();
            }
        }
        Self::checked(vec![m, n], out, "matmul_nt")
    }

    /// `self[k×m]ᵀ · other[k×n]`.
    pub fn matmul_tn(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        let (k, m) = self.dims2("matmul_tn")?;
        let (k2, n) = other.dims2("matmul_tn")?;
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul_tn",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let mut out = vec![0.0; m * n];
        for p in 0..k {
            let a = &self.data[p * m..(p + 1) * m];
            let b = &other.data[p * n..(p + 1) * n];
            for (i, &av) in a.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let row = &mut out[i * n..(i + 1) * n];
                for (o, &bv) in row.iter_mut().zip(b) {
                    *o += av * bv;
                }
            }
        }
        Self::checked(vec![m, n], out, "matmul_tn")
    }

    pub fn transpose(&self) -> Result<Tensor, TensorError> {
        let (m, n) = self.dims2("transpose")?;
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Ok(Self {
            shape: vec![n, m],
            data: out,
        })
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor, TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch {
                op: "zip_map",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        if !all_finite(&self.data) || !all_finite(&other.data) {
            return Err(TensorError::NonFinite { op: "zip_map" });
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Self::checked(self.shape.clone(), data, "zip_map")
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Tensor, TensorError> {
        if !all_finite(&self.data) {
            return Err(TensorError::NonFinite { op: "map" });
        }
        let data = self.data.iter().map(|&v| f(v)).collect();
        Self::checked(self.shape.clone(), data, "map")
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Result<Tensor, TensorError> {
        self.map(|v| v * s)
    }

    /// In-place `self += other`.
    pub fn add_assign(&mut self, other: &Tensor) -> Result<(), TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch {
                op: "add_assign",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        self.ensure_finite("add_assign")
    }

    /// Adds `bias[n]` to every row of `self[m×n]`.
    pub fn add_row(&self, bias: &Tensor) -> Result<Tensor, TensorError> {
        let (_, n) = self.dims2("add_row")?;
        if bias.shape != [n] {
            return Err(TensorError::ShapeMismatch {
                op: "add_row",
                left: self.shape.clone(),
                right: bias.shape.clone(),
            });
        }
        let mut data = self.data.clone();
        for row in data.chunks_mut(n) {
            for (v, b) in row.iter_mut().zip(&bias.data) {
                *v += b;
            }
        }
        Self::checked(self.shape.clone(), data, "add_row")
    }

    /// Collapses `axis` with the given reduction.
    pub fn reduce(&self, axis: usize, kind: Reduction) -> Result<Tensor, TensorError> {
        let rank = self.rank();
        if axis >= rank {
            return Err(TensorError::InvalidAxis { axis, rank });
        }
        if !all_finite(&self.data) {
            return Err(TensorError::NonFinite { op: "reduce" });
        }
        let outer: usize = self.shape[..axis].iter().product();
        let extent = self.shape[axis];
        let inner: usize = self.shape[axis + 1..].iter().product();
        let init = match kind {
            Reduction::Max => f64::NEG_INFINITY,
            _ => 0.0,
        };
        let mut out = vec![init; outer * inner];
        for o in 0..outer {
            for e in 0..extent {
                let src = &self.data[(o * extent + e) * inner..(o * extent + e + 1) * inner];
                let dst = &mut out[o * inner..(o + 1) * inner];
                for (d, &s) in dst.iter_mut().zip(src) {
                    match kind {
                        Reduction::Max => *d = d.max(s),
                        _ => *d += s,
                    }
                }
            }
        }
        if kind == Reduction::Mean {
            for v in &mut out {
                *v /= extent as f64;
            }
        }
        let mut shape: Vec<usize> = self.shape.clone();
        shape.remove(axis);
        if shape.is_empty() {
            shape.push(1);
        }
        Self::checked(shape, out, "reduce")
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Swaps the last two axes of a rank-3 tensor.
    pub fn swap_last2(&self) -> Result<Tensor, TensorError> {
        let [b, r, c] = self.shape[..] else {
            return Err(TensorError::ShapeMismatch {
                op: "swap_last2",
                left: self.shape.clone(),
                right: vec![],
            });
        };
        let mut out = vec![0.0; self.data.len()];
        for bi in 0..b {
            let base = bi * r * c;
            for i in 0..r {
                for j in 0..c {
                    out[base + j * r + i] = self.data[base + i * c + j];
                }
            }
        }
        Ok(Self {
            shape: vec![b, c, r],
            data: out,
        })
    }

    /// Rows `rows` of a rank-2 tensor, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Tensor, TensorError> {
        let (m, n) = self.dims2("select_rows")?;
        if rows.is_empty() {
            return Err(TensorError::InvalidParameter("select_rows: empty selection".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            if r >= m {
                return Err(TensorError::InvalidParameter(format!("select_rows: row {r} out of {m}")));
            }
            data.extend_from_slice(&self.data[r * n..(r + 1) * n]);
        }
        Ok(Self {
            shape: vec![rows.len(), n],
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use super::Rng;

    fn t2(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn matmul_hand_example() {
        let a = t2(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = t2(&[&[5.0], &[6.0]]);
        assert_eq!(a.matmul(&b).unwrap().data(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_identity_and_zero() {
        let a = t2(&[&[1.5, -2.0, 3.0], &[0.25, 4.0, -1.0]]);
        assert_eq!(a.matmul(&Tensor::identity(3)).unwrap(), a);
        let z = a.matmul(&Tensor::zeros(&[3, 4])).unwrap();
        assert_eq!(z, Tensor::zeros(&[2, 4]));
    }

    #[test]
    fn matmul_shape_error_names_both() {
        let err = Tensor::zeros(&[2, 3]).matmul(&Tensor::zeros(&[2, 3])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
    }

    #[test]
    fn transposed_products_agree() {
        let mut rng = Rng::new(8);
        let a = rng_normal(&mut rng, &[3, 4], 0.0, 1.0).unwrap();
        let b = rng_normal(&mut rng, &[5, 4], 0.0, 1.0).unwrap();
        let c = rng_normal(&mut rng, &[3, 5], 0.0, 1.0).unwrap();
        let nt = a.matmul_nt(&b).unwrap();
        let direct = a.matmul(&b.transpose().unwrap()).unwrap();
        for (x, y) in nt.data().iter().zip(direct.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        let tn = a.matmul_tn(&c).unwrap();
        let direct = a.transpose().unwrap().matmul(&c).unwrap();
        for (x, y) in tn.data().iter().zip(direct.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn zip_map_examples() {
        let a = Tensor::vector(&[1.0, 2.0]).unwrap();
        let b = Tensor::vector(&[3.0, 4.0]).unwrap();
        assert_eq!(a.mul(&b).unwrap().data(), &[3.0, 8.0]);
        assert_eq!(a.mul(&Tensor::ones(&[2])).unwrap(), a);
        assert_eq!(a.mul(&Tensor::zeros(&[2])).unwrap(), Tensor::zeros(&[2]));
        assert!(a.mul(&Tensor::zeros(&[3])).is_err());
    }

    #[test]
    fn reduce_examples() {
        let v = Tensor::vector(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(v.reduce(0, Reduction::Sum).unwrap().data(), &[6.0]);
        let v = Tensor::vector(&[2.0, 4.0]).unwrap();
        assert_eq!(v.reduce(0, Reduction::Mean).unwrap().data(), &[3.0]);
        let v = Tensor::vector(&[-1.0, 5.0, 2.0]).unwrap();
        assert_eq!(v.reduce(0, Reduction::Max).unwrap().data(), &[5.0]);
        assert!(matches!(v.reduce(1, Reduction::Sum), Err(TensorError::InvalidAxis { .. })));
    }

    #[test]
    fn reduce_matrix_axes() {
        let a = t2(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        assert_eq!(a.reduce(0, Reduction::Sum).unwrap().data(), &[5.0, 7.0, 9.0]);
        assert_eq!(a.reduce(1, Reduction::Max).unwrap().data(), &[3.0, 6.0]);
    }

    #[test]
    fn nan_inputs_are_rejected() {
        assert!(Tensor::vector(&[1.0, f64::NAN]).is_err());
        let mut a = Tensor::vector(&[1.0, 2.0]).unwrap();
        a.data_mut()[1] = f64::NAN;
        let b = Tensor::vector(&[1.0, 1.0]).unwrap();
        assert!(matches!(a.zip_map(&b, |x, _| x), Err(TensorError::NonFinite { .. })));
        assert!(matches!(b.zip_map(&a, |x, _| x), Err(TensorError::NonFinite { .. })));
        assert!(matches!(a.reduce(0, Reduction::Max), Err(TensorError::NonFinite { .. })));
        assert!(matches!(a.map(|_| 0.0), Err(TensorError::NonFinite { .. })));
        let m = a.reshape(&[1, 2]).unwrap();
        assert!(m.matmul(&Tensor::ones(&[2, 1])).is_err());
    }

    #[test]
    fn overflow_is_rejected() {
        let a = Tensor::vector(&[1e308]).unwrap();
        assert!(a.scale(10.0).is_err());
    }

    #[test]
    fn swap_last2_roundtrip() {
        let t = Tensor::new(&[2, 3, 4], (0..24).map(f64::from).collect()).unwrap();
        let s = t.swap_last2().unwrap();
        assert_eq!(s.shape(), &[2, 4, 3]);
        assert_eq!(s.data()[1], t.data()[4]);
        assert_eq!(s.swap_last2().unwrap(), t);
    }

    fn small_matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
        proptest::collection::vec(-3.0f64..3.0, rows * cols)
            .prop_map(move |d| Tensor::new(&[rows, cols], d).unwrap())
    }

    proptest! {
        #[test]
        fn matmul_is_associative(
            (a, b, c) in (1usize..5, 1usize..5, 1usize..5, 1usize..5)
                .prop_flat_map(|(m, k, l, n)| (small_matrix(m, k), small_matrix(k, l), small_matrix(l, n)))
        ) {
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            for (x, y) in left.data().iter().zip(right.data()) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }

        #[test]
        fn multiply_commutes_and_zero_is_additive_identity(
            (a, b) in (1usize..6, 1usize..6).prop_flat_map(|(m, n)| (small_matrix(m, n), small_matrix(m, n)))
        ) {
            prop_assert_eq!(a.mul(&b).unwrap(), b.mul(&a).unwrap());
            let z = Tensor::zeros(a.shape());
            prop_assert_eq!(a.add(&z).unwrap(), a.clone());
        }

        #[test]
        fn mean_is_sum_over_extent(
            (a, axis) in (1usize..9, 1usize..9)
                .prop_flat_map(|(m, n)| (small_matrix(m, n), 0usize..2))
        ) {
            let extent = a.shape()[axis];
            let mean = a.reduce(axis, Reduction::Mean).unwrap();
            let sum = a.reduce(axis, Reduction::Sum).unwrap();
            for (m, s) in mean.data().iter().zip(sum.data()) {
                let expect = s / extent as f64;
                if extent.is_power_of_two() {
                    prop_assert_eq!(*m, expect);
                } else {
                    prop_assert!((m - expect).abs() <= 1e-12);
                }
            }
        }
    }
}
