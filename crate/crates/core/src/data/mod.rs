//! Admission records: schema, CSV ingestion, imputation, encoding, date
//! features, min-max scaling and a synthetic generator.

mod dataset;
mod encode;
mod impute;
mod scale;
mod schema;
mod synth;

pub use dataset::{format_number, parse_records, write_rejections, Column, Dataset, ParseOutcome, Rejection};
pub use encode::{encode_categoricals, engineer_date_features, fit_encoding, EncodingPlan, MONTH, WEEKDAY, YEAR};
pub use impute::{knn_impute, KnnParams};
pub use scale::{inverse_scale, scale_minmax, FeatureMatrix, MatrixScaler, MinMax, ScalePlan};
pub use schema::{
    normalize_name, sparcs_schema, ColumnKind, ColumnSchema, COSTS, DATE_COLUMN, IMPUTATION_KEYS, LOS_MAX, SEVERITY,
    TARGET,
};
pub use synth::{generate_synthetic, los_summary, LosSummary, SynthProfile};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("column {column:?}: category {value:?} was not seen when the encoding was fitted")]
    UnseenCategory { column: String, value: String },
    #[error("no fitted parameters for column {0:?}")]
    Unfitted(String),
    #[error("empty dataset: {0}")]
    Empty(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WrangleOptions {
    pub knn: KnnParams,
    pub one_hot: bool,
}

/// Everything fitted by [`wrangle`], enough to replay it on new rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WranglePlan {
    pub knn: KnnParams,
    pub date_features: bool,
    pub encoding: EncodingPlan,
    pub scaling: ScalePlan,
}

impl WranglePlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Date features, imputation and encoding: a fully observed numeric
/// dataset in original units, plus the encoding tables.
pub fn prepare(ds: &Dataset, options: &WrangleOptions) -> Result<(Dataset, EncodingPlan, bool), DataError> {
    let (dated, notice) = engineer_date_features(ds)?;
    let imputed = knn_impute(&dated, &options.knn)?;
    let plan = fit_encoding(&imputed, options.one_hot)?;
    let encoded = encode_categoricals(&imputed, &plan)?;
    Ok((encoded, plan, notice.is_none()))
}

/// The complete pipeline with scaling fitted on every row.
pub fn wrangle(ds: &Dataset, options: &WrangleOptions) -> Result<(Dataset, WranglePlan), DataError> {
    let (encoded, encoding, date_features) = prepare(ds, options)?;
    let (scaled, scaling) = scale_minmax(&encoded, None)?;
    Ok((
        scaled,
        WranglePlan {
            knn: options.knn.clone(),
            date_features,
            encoding,
            scaling,
        },
    ))
}

/// Replays a fitted plan. Imputation is re-run on `ds` itself.
pub fn apply_plan(ds: &Dataset, plan: &WranglePlan) -> Result<Dataset, DataError> {
    let (dated, _) = engineer_date_features(ds)?;
    let imputed = knn_impute(&dated, &plan.knn)?;
    let encoded = encode_categoricals(&imputed, &plan.encoding)?;
    Ok(scale_minmax(&encoded, Some(&plan.scaling))?.0)
}
