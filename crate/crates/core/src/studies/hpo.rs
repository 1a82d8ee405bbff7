use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{holdout_run, StudyError};
use crate::data::FeatureMatrix;
use crate::eval::{run_model_zoo, FoldPlan, TestKind};
use crate::nn::ModelSpec;
use crate::tensor::Rng;
use crate::train::TrainConfig;

pub const DEFAULT_LEARNING_RATES: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];
pub const DEFAULT_BATCH_SIZES: [usize; 7] = [128, 256, 512, 1024, 2048, 4096, 8192];

const SPLIT_STREAM: u64 = 0x686f6c64;
const INIT_STREAM: u64 = 0x696e6974;
const TIE: f64 = 1e-12;

/// Disjoint train, validation and test rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded 80/10/10 split. Each part gets at least one row, so `n >= 3`.
pub fn holdout_split(n: usize, seed: u64) -> Result<HoldoutSplit, StudyError> {
    if n < 3 {
        return Err(StudyError::Config(format!("a train/validation/test split needs at least 3 rows, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::derive(seed, &[SPLIT_STREAM]).shuffle(&mut order);
    let part = ((n as f64 * 0.1).round() as usize).max(1);
    let test = order.split_off(n - part);
    let val = order.split_off(n - 2 * part);
    Ok(HoldoutSplit { train: order, val, test })
}

#[derive(Debug, Clone)]
pub enum HpoPlan {
    Holdout(HoldoutSplit),
    CrossValidation(FoldPlan),
}

/// Test RMSE per `(learning rate, batch size)`; rows follow
/// `learning_rates`, columns follow `batch_sizes`. A failed cell holds `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpoGrid {
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub rmse: Vec<Vec<f64>>,
    pub failures: Vec<(usize, usize, String)>,
}

impl HpoGrid {
    pub fn cells(&self) -> usize {
        self.rmse.iter().map(Vec::len).sum()
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W, seed: u64) -> Result<(), csv::Error> {
        writeln!(w, "# seed={seed}")?;
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["learning_rate".to_string()];
        header.extend(self.batch_sizes.iter().map(|b| b.to_string()));
        out.write_record(&header)?;
        for (lr, row) in self.learning_rates.iter().zip(&self.rmse) {
            let mut rec = vec![format!("{lr:e}")];
            rec.extend(row.iter().map(|v| format!("{v:.6}")));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpoResult {
    pub grid: HpoGrid,
    /// `(row, column)` of the best cell; `None` when every cell failed.
    pub best: Option<(usize, usize)>,
    pub best_config: Option<TrainConfig>,
}

/// Lowest finite RMSE; values within 1e-12 tie and go to the smaller
/// learning rate, then the smaller batch size.
pub fn pick_best(learning_rates: &[f64], batch_sizes: &[usize], rmse: &[Vec<f64>]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for (i, row) in rmse.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                continue;
            }
            let better = match best {
                None => true,
                Some((bi, bj)) => {
                    let b = rmse[bi][bj];
                    if v < b - TIE {
                        true
                    } else if (v - b).abs() <= TIE {
                        (learning_rates[i], batch_sizes[j]) < (learning_rates[bi], batch_sizes[bj])
                    } else {
                        false
                    }
                }
            };
            if better {
                best = Some((i, j));
            }
        }
    }
    best
}

/// Every cell trains with the same seed and, under a holdout plan, the same
/// initial weights, so cells differ only in learning rate and batch size.
pub fn grid_search_hpo(
    data: &FeatureMatrix,
    spec: &ModelSpec,
    base: &TrainConfig,
    learning_rates: &[f64],
    batch_sizes: &[usize],
    plan: &HpoPlan,
) -> Result<HpoResult, StudyError> {
    if learning_rates.is_empty() || batch_sizes.is_empty() {
        return Err(StudyError::Config("learning-rate and batch-size lists must be non-empty".into()));
    }
    base.validate()?;
    let cols = batch_sizes.len();
    let init_seed = Rng::derive(base.seed, &[INIT_STREAM]).seed();
    let cells: Vec<Result<f64, String>> = (0..learning_rates.len() * cols)
        .into_par_iter()
        .map(|cell| {
            let cfg = TrainConfig {
                learning_rate: learning_rates[cell / cols],
                batch_size: batch_sizes[cell % cols],
                ..base.clone()
            };
            match plan {
                HpoPlan::Holdout(split) => holdout_run(data, spec, &cfg, split, init_seed)
                    .map(|(m, _)| m.rmse)
                    .map_err(|e| e.to_string()),
                HpoPlan::CrossValidation(folds) => {
                    let run = run_model_zoo(data, std::slice::from_ref(spec), &cfg, folds, None, TestKind::Welch)
                        .map_err(|e| e.to_string())?;
                    if let Some(f) = run.failures.first() {
                        return Err(format!("fold {}: {}", f.fold, f.error));
                    }
                    Ok(run.reports.iter().map(|r| r.metrics.rmse).sum::<f64>() / run.reports.len() as f64)
                }
            }
        })
        .collect();
    let mut rmse = vec![vec![f64::INFINITY; cols]; learning_rates.len()];
    let mut failures = vec![];
    for (cell, outcome) in cells.into_iter().enumerate() {
        let (i, j) = (cell / cols, cell % cols);
        match outcome {
            Ok(v) if v.is_finite() => rmse[i][j] = v,
            Ok(v) => failures.push((i, j, format!("non-finite RMSE {v}"))),
            Err(e) => {
                log::warn!("hpo cell lr={} batch={} failed: {e}", learning_rates[i], batch_sizes[j]);
                failures.push((i, j, e));
            }
        }
    }
    let best = pick_best(learning_rates, batch_sizes, &rmse);
    let best_config = best.map(|(i, j)| TrainConfig {
        learning_rate: learning_rates[i],
        batch_size: batch_sizes[j],
        ..base.clone()
    });
    Ok(HpoResult {
        grid: HpoGrid {
            learning_rates: learning_rates.to_vec(),
            batch_sizes: batch_sizes.to_vec(),
            rmse,
            failures,
        },
        best,
        best_config,
    })
}
