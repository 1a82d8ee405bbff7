//! Leave-one-feature-out elimination, the learning-rate by batch-size grid
//! and the greedy recurrent depth search.

mod depth;
mod featsel;
mod hpo;

pub use depth::{choose_depth, greedy_layer_search, DepthSearch, DEPTH_TOLERANCE};
pub use featsel::{feature_elimination_study, FeatureRecord, FeatureStudyReport};
pub use hpo::{
    grid_search_hpo, holdout_split, pick_best, HoldoutSplit, HpoGrid, HpoPlan, HpoResult, DEFAULT_BATCH_SIZES,
    DEFAULT_LEARNING_RATES,
};

use thiserror::Error;

use crate::data::{DataError, FeatureMatrix, MatrixScaler};
use crate::eval::EvalError;
use crate::nn::{build_model, ModelSpec, NnError};
use crate::tensor::Rng;
use crate::train::{metrics_compute, train_model_with_validation, MetricsReport, Samples, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

/// Trains on `split.train`, early-stops on `split.val` and scores `split.test`
/// in original target units. Scaling is fitted on the training rows.
pub(crate) fn holdout_run(
    data: &FeatureMatrix,
    spec: &ModelSpec,
    config: &TrainConfig,
    split: &HoldoutSplit,
    init_seed: u64,
) -> Result<(MetricsReport, f64), StudyError> {
    let scaler = MatrixScaler::fit(data, &split.train)?;
    let (xt, yt) = scaler.transform(data, &split.train)?;
    let (xv, yv) = scaler.transform(data, &split.val)?;
    let (xs, _) = scaler.transform(data, &split.test)?;
    let spec = spec.clone().with_input_features(data.features());
    let model = build_model(&spec, &mut Rng::new(init_seed))?;
    let (model, _) = train_model_with_validation(model, Samples::new(&xt, &yt)?, Some(Samples::new(&xv, &yv)?), config)?;
    let val_pred = model.predict(&xv, 4096)?;
    let val_rmse = metrics_compute(&yv, &val_pred)?.rmse;
    let test_pred = scaler.inverse_target(&model.predict(&xs, 4096)?);
    let truth: Vec<f64> = split.test.iter().map(|&r| data.y[r]).collect();
    Ok((metrics_compute(&truth, &test_pred)?, val_rmse))
}
