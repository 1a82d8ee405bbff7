//! Cross-validation, the model-zoo comparison, fold statistics and t-tests.

mod folds;
mod report;
mod stats;
mod zoo;

pub use folds::{kfold_split, FoldPlan};
pub use report::{
    build_zoo_report, read_fold_reports, summarize_folds, write_fold_reports, write_zoo_summary, zoo_report_json, FailedCell,
    FoldReport, FoldSummary, ModelPanel, Summary, ZooMeta, ZooReport,
};
pub use stats::{paired_t_test, student_t_two_sided, t_test, welch_t_test, TTest, TestKind};
pub use zoo::{run_cell, run_model_zoo, CellHistory, CellOutcome, ZooRun};

use thiserror::Error;

use crate::data::DataError;
use crate::nn::NnError;
use crate::tensor::TensorError;
use crate::train::TrainError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
