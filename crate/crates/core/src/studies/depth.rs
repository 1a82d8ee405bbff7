use serde::{Deserialize, Serialize};

use super::{holdout_run, holdout_split, StudyError};
use crate::data::FeatureMatrix;
use crate::nn::ModelSpec;
use crate::tensor::Rng;
use crate::train::TrainConfig;

/// Minimum validation RMSE improvement (scaled units) that justifies one
/// more recurrent layer.
pub const DEPTH_TOLERANCE: f64 = 1e-3;

const INIT_STREAM: u64 = 0x64657074;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSearch {
    pub depth: usize,
    /// Validation RMSE for depths 1, 2, ...; `trace[i]` is depth `i + 1`.
    pub trace: Vec<f64>,
}

/// The stopping rule on a finished or partial trace: the last depth before
/// the first one that fails to improve by `tolerance`.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn choose_depth(trace: &[f64], tolerance: f64) -> usize {
    for d in 1..trace.len() {
        // NaN and inf count as no improvement
        if !(trace[d] <= trace[d - 1] - tolerance) {
            return d;
        }
    }
    trace.len()
}

/// Depths 1..=`max_depth` on a fixed validation split, stopping early.
/// Every depth starts from the same seed. RMSE is in scaled target units.
pub fn greedy_layer_search(
    data: &FeatureMatrix,
    base: &ModelSpec,
    config: &TrainConfig,
    max_depth: usize,
    tolerance: f64,
) -> Result<DepthSearch, StudyError> {
    if max_depth == 0 {
        return Err(StudyError::Config("max depth must be at least 1".into()));
    }
    if !base.has_recurrent() {
        return Err(StudyError::Config(format!("model {:?} has no recurrent block to deepen", base.name)));
    }
    let split = holdout_split(data.rows(), config.seed)?;
    let init_seed = Rng::derive(config.seed, &[INIT_STREAM]).seed();
    let mut trace = vec![];
    for depth in 1..=max_depth {
        let spec = base.clone().with_stack_depth(depth);
        let rmse = match holdout_run(data, &spec, config, &split, init_seed) {
            Ok((_, val_rmse)) => val_rmse,
            Err(e) => {
                log::warn!("depth {depth} failed: {e}");
                f64::INFINITY
            }
        };
        trace.push(rmse);
        let chosen = choose_depth(&trace, tolerance);
        if chosen < trace.len() {
            return Ok(DepthSearch { depth: chosen, trace });
        }
    }
    Ok(DepthSearch { depth: max_depth, trace })
}
