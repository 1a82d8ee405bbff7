use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::StudyError;
use crate::data::FeatureMatrix;
use crate::eval::{run_model_zoo, FoldPlan, TestKind};
use crate::nn::ModelSpec;
use crate::train::TrainConfig;

/// Cross-validated means with one feature removed (`feature == None` for
/// the all-features baseline). Means are NaN when every fold failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub feature: Option<String>,
    pub mean_r: f64,
    pub mean_mae: f64,
    pub mean_rmse: f64,
    pub delta_r: f64,
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStudyReport {
    pub baseline: FeatureRecord,
    /// Sorted by `delta_r`, largest gain first.
    pub removals: Vec<FeatureRecord>,
    /// Cross-validated runs performed.
    pub runs: usize,
}

impl FeatureStudyReport {
    /// Baseline row first, then removals in report order.
    pub fn write_csv<W: io::Write>(&self, mut w: W, seed: u64) -> Result<(), csv::Error> {
        writeln!(w, "# seed={seed}")?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["feature", "mean_r", "mean_mae", "mean_rmse", "delta_r_vs_baseline"])?;
        for r in std::iter::once(&self.baseline).chain(&self.removals) {
            out.write_record([
                r.feature.clone().unwrap_or_else(|| "(baseline)".into()),
                format!("{:.6}", r.mean_r),
                format!("{:.6}", r.mean_mae),
                format!("{:.6}", r.mean_rmse),
                format!("{:.6}", r.delta_r),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// One baseline run and one run per removed feature, all on the same folds
/// and seed.
pub fn feature_elimination_study(
    data: &FeatureMatrix,
    spec: &ModelSpec,
    config: &TrainConfig,
    plan: &FoldPlan,
) -> Result<FeatureStudyReport, StudyError> {
    let f = data.features();
    if f < 2 {
        return Err(StudyError::Config(format!("feature elimination needs at least 2 features, got {f}")));
    }
    let records: Vec<FeatureRecord> = (0..=f)
        .into_par_iter()
        .map(|i| -> Result<FeatureRecord, StudyError> {
            let (feature, matrix) = match i {
                0 => (None, data.clone()),
                i => {
                    let name = data.names[i - 1].clone();
                    let m = data.without_feature(&name)?;
                    (Some(name), m)
                }
            };
            let run = run_model_zoo(&matrix, std::slice::from_ref(spec), config, plan, None, TestKind::Welch)?;
            let ms = || run.reports.iter().map(|r| &r.metrics);
            Ok(FeatureRecord {
                feature,
                mean_r: mean(ms().filter_map(|m| m.r)),
                mean_mae: mean(ms().map(|m| m.mae)),
                mean_rmse: mean(ms().map(|m| m.rmse)),
                delta_r: 0.0,
                folds: run.reports.len(),
            })
        })
        .collect::<Result<_, _>>()?;
    let runs = records.len();
    let mut records = records.into_iter();
    let baseline = records.next().expect("baseline run");
    let mut removals: Vec<FeatureRecord> = records
        .map(|mut r| {
            r.delta_r = r.mean_r - baseline.mean_r;
            r
        })
        .collect();
    removals.sort_by(|a, b| b.delta_r.total_cmp(&a.delta_r));
    Ok(FeatureStudyReport { baseline, removals, runs })
}
