use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::tensor::Rng;

/// Disjoint, covering, size-balanced row folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn rows(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }

    pub fn test_rows(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Every row outside `fold`, in fold order.
    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        self.folds
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != fold)
            .flat_map(|(_, f)| f.iter().copied())
            .collect()
    }
}

/// Seeded shuffle of `0..n` cut into `k` contiguous slices; the first
/// `n mod k` folds take one extra row.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    if k < 2 {
        return Err(EvalError::Config(format!("fold count must be at least 2, got {k}")));
    }
    if k > n {
        return Err(EvalError::Config(format!("fold count {k} exceeds row count {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::derive(seed, &[0x666f_6c64]).shuffle(&mut order);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(FoldPlan { k, seed, folds })
}
