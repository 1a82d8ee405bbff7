use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::FoldPlan;
use super::report::{build_zoo_report, FailedCell, FoldReport, ZooReport};
use super::stats::TestKind;
use super::EvalError;
use crate::data::{FeatureMatrix, MatrixScaler};
use crate::nn::{build_model, ModelSpec};
use crate::tensor::Rng;
use crate::train::{metrics_compute, train_model, MetricsReport, Samples, TrainConfig, TrainHistory};

const PREDICT_CHUNK: usize = 4096;

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub metrics: MetricsReport,
    pub history: TrainHistory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellHistory {
    pub model: String,
    pub fold: usize,
    pub history: TrainHistory,
}

#[derive(Debug, Clone)]
pub struct ZooRun {
    pub reports: Vec<FoldReport>,
    pub failures: Vec<FailedCell>,
    pub histories: Vec<CellHistory>,
    pub report: ZooReport,
}

/// Trains `spec` on every fold but `fold` and scores the held-out rows in
/// original target units. Scaling is fitted on the training rows only. The
/// cell's randomness is derived from `(config.seed, model_index, fold)`.
pub fn run_cell(
    data: &FeatureMatrix,
    spec: &ModelSpec,
    config: &TrainConfig,
    plan: &FoldPlan,
    model_index: usize,
    fold: usize,
) -> Result<CellOutcome, EvalError> {
    if plan.rows() != data.rows() {
        return Err(EvalError::Config(format!(
            "fold plan covers {} rows but the data has {}",
            plan.rows(),
            data.rows()
        )));
    }
    let train_rows = plan.train_rows(fold);
    let test_rows = plan.test_rows(fold);
    let scaler = MatrixScaler::fit(data, &train_rows)?;
    let (x_train, y_train) = scaler.transform(data, &train_rows)?;
    let (x_test, _) = scaler.transform(data, test_rows)?;
    let mut cell = Rng::derive(config.seed, &[model_index as u64, fold as u64]);
    let mut init = cell.split();
    let cfg = TrainConfig {
        seed: cell.next_u64(),
        ..config.clone()
    };
    let spec = spec.clone().with_input_features(data.features());
    let model = build_model(&spec, &mut init)?;
    let (model, history) = train_model(model, Samples::new(&x_train, &y_train)?, &cfg)?;
    let scaled = model.predict(&x_test, PREDICT_CHUNK)?;
    let predictions = scaler.inverse_target(&scaled);
    let truth: Vec<f64> = test_rows.iter().map(|&r| data.y[r]).collect();
    Ok(CellOutcome {
        metrics: metrics_compute(&truth, &predictions)?,
        history,
    })
}

/// Every `(model, fold)` cell; failures are recorded and do not stop the run.
/// Cells run on the current rayon pool and are assembled by index.
pub fn run_model_zoo(
    data: &FeatureMatrix,
    zoo: &[ModelSpec],
    config: &TrainConfig,
    plan: &FoldPlan,
    proposed: Option<&str>,
    test: TestKind,
) -> Result<ZooRun, EvalError> {
    if zoo.is_empty() {
        return Err(EvalError::Config("model zoo is empty".into()));
    }
    config.validate()?;
    let k = plan.k;
    let outcomes: Vec<Result<CellOutcome, EvalError>> = (0..zoo.len() * k)
        .into_par_iter()
        .map(|cell| run_cell(data, &zoo[cell / k], config, plan, cell / k, cell % k))
        .collect();
    let mut reports = vec![];
    let mut failures = vec![];
    let mut histories = vec![];
    for (cell, outcome) in outcomes.into_iter().enumerate() {
        let (model, fold) = (zoo[cell / k].name.clone(), cell % k);
        match outcome {
            Ok(o) => {
                reports.push(FoldReport {
                    model: model.clone(),
                    fold,
                    metrics: o.metrics,
                });
                histories.push(CellHistory {
                    model,
                    fold,
                    history: o.history,
                });
            }
            Err(e) => {
                log::warn!("{model} fold {fold} failed: {e}");
                failures.push(FailedCell {
                    model,
                    fold,
                    error: e.to_string(),
                });
            }
        }
    }
    let names: Vec<String> = zoo.iter().map(|s| s.name.clone()).collect();
    let report = build_zoo_report(&names, k, &reports, proposed, test);
    Ok(ZooRun {
        reports,
        failures,
        histories,
        report,
    })
}
