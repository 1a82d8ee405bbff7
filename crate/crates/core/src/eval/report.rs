use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};

use super::stats::{t_test, TTest, TestKind};
use super::EvalError;
use crate::train::MetricsReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub model: String,
    pub fold: usize,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub model: String,
    pub fold: usize,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub max: f64,
    pub min: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Self {
            mean,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            std,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub folds: usize,
    pub mse: Summary,
    pub rmse: Summary,
    pub loss: Summary,
    pub mae: Summary,
    /// Over the folds where R is defined.
    pub r: Option<Summary>,
}

/// Mean, max, min and sample standard deviation of each metric.
pub fn summarize_folds(reports: &[FoldReport]) -> Result<FoldSummary, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::Config("no fold reports to summarize".into()));
    }
    let pick = |f: fn(&MetricsReport) -> f64| -> Summary {
        let v: Vec<f64> = reports.iter().map(|r| f(&r.metrics)).collect();
        Summary::of(&v).expect("non-empty")
    };
    let r: Vec<f64> = reports.iter().filter_map(|r| r.metrics.r).collect();
    Ok(FoldSummary {
        folds: reports.len(),
        mse: pick(|m| m.mse),
        rmse: pick(|m| m.rmse),
        loss: pick(|m| m.loss),
        mae: pick(|m| m.mae),
        r: Summary::of(&r),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPanel {
    pub model: String,
    /// `None` when every fold failed.
    pub summary: Option<FoldSummary>,
    pub missing_folds: Vec<usize>,
    /// Test of this model's R values against the proposed model's.
    pub test: Option<TTest>,
}

impl ModelPanel {
    pub fn complete(&self) -> bool {
        self.missing_folds.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZooReport {
    pub folds: usize,
    pub proposed: Option<String>,
    pub test_kind: TestKind,
    pub panels: Vec<ModelPanel>,
}

/// Value as persisted: six decimals.
fn persisted(v: f64) -> f64 {
    format!("{v:.6}").parse().expect("formatted float parses")
}

fn persisted_metrics(m: &MetricsReport) -> MetricsReport {
    MetricsReport {
        mse: persisted(m.mse),
        rmse: persisted(m.rmse),
        loss: persisted(m.loss),
        mae: persisted(m.mae),
        r: m.r.map(persisted),
        n: m.n,
    }
}

/// Summaries and tests computed from the six-decimal values that
/// [`write_fold_reports`] stores, so a report rebuilt from that file is
/// identical to the original.
pub fn build_zoo_report(models: &[String], k: usize, reports: &[FoldReport], proposed: Option<&str>, kind: TestKind) -> ZooReport {
    let mut by_model: BTreeMap<&str, Vec<FoldReport>> = BTreeMap::new();
    for r in reports {
        let mut q = r.clone();
        q.metrics = persisted_metrics(&r.metrics);
        by_model.entry(r.model.as_str()).or_default().push(q);
    }
    for v in by_model.values_mut() {
        v.sort_by_key(|r| r.fold);
    }
    let r_values = |m: &str| -> Vec<(usize, f64)> {
        by_model
            .get(m)
            .map(|v| v.iter().filter_map(|r| r.metrics.r.map(|x| (r.fold, x))).collect())
            .unwrap_or_default()
    };
    let reference = proposed.map(r_values);
    let panels = models
        .iter()
        .map(|m| {
            let rs = by_model.get(m.as_str()).cloned().unwrap_or_default();
            let present: Vec<usize> = rs.iter().map(|r| r.fold).collect();
            let test = match (&reference, proposed) {
                (Some(base), Some(p)) if p != m => {
                    let mine = r_values(m);
                    let (a, b): (Vec<f64>, Vec<f64>) = match kind {
                        TestKind::Paired => mine
                            .iter()
                            .filter_map(|&(f, x)| base.iter().find(|(g, _)| *g == f).map(|&(_, y)| (y, x)))
                            .unzip(),
                        TestKind::Welch => (base.iter().map(|p| p.1).collect(), mine.iter().map(|p| p.1).collect()),
                    };
                    t_test(kind, &a, &b).ok()
                }
                _ => None,
            };
            ModelPanel {
                model: m.clone(),
                summary: summarize_folds(&rs).ok(),
                missing_folds: (0..k).filter(|f| !present.contains(f)).collect(),
                test,
            }
        })
        .collect();
    ZooReport {
        folds: k,
        proposed: proposed.map(String::from),
        test_kind: kind,
        panels,
    }
}

/// Run parameters carried as `# key=value` comment lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZooMeta {
    pub seed: u64,
    pub folds: usize,
    pub models: Vec<String>,
    pub proposed: Option<String>,
    pub test: TestKind,
}

impl ZooMeta {
    pub fn comment_lines(&self) -> Vec<String> {
        let test = match self.test {
            TestKind::Welch => "welch",
            TestKind::Paired => "paired",
        };
        vec![
            format!("# seed={}", self.seed),
            format!("# folds={}", self.folds),
            format!("# models={}", self.models.join(",")),
            format!("# proposed={}", self.proposed.as_deref().unwrap_or("")),
            format!("# test={test}"),
        ]
    }

    fn from_comments(text: &str) -> Result<Self, EvalError> {
        let mut kv = BTreeMap::new();
        for line in text.lines().filter_map(|l| l.strip_prefix('#')) {
            if let Some((k, v)) = line.trim().split_once('=') {
                kv.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| EvalError::Config(format!("fold report file lacks '# {k}=' header")));
        let bad = |k: &str| EvalError::Config(format!("fold report header {k} is malformed"));
        Ok(Self {
            seed: get("seed")?.parse().map_err(|_| bad("seed"))?,
            folds: get("folds")?.parse().map_err(|_| bad("folds"))?,
            models: get("models")?.split(',').filter(|s| !s.is_empty()).map(String::from).collect(),
            proposed: kv.get("proposed").filter(|s| !s.is_empty()).cloned(),
            test: match kv.get("test").map(String::as_str) {
                None | Some("welch") => TestKind::Welch,
                Some("paired") => TestKind::Paired,
                Some(_) => return Err(bad("test")),
            },
        })
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// Columns `model, fold, mse, rmse, loss, mae, r`; undefined R is empty.
pub fn write_fold_reports<W: io::Write>(mut w: W, meta: &ZooMeta, reports: &[FoldReport]) -> Result<(), EvalError> {
    for line in meta.comment_lines() {
        writeln!(w, "{line}")?;
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["model", "fold", "mse", "rmse", "loss", "mae", "r"])?;
    for r in reports {
        let m = &r.metrics;
        out.write_record([
            r.model.clone(),
            r.fold.to_string(),
            fmt(m.mse),
            fmt(m.rmse),
            fmt(m.loss),
            fmt(m.mae),
            fmt_opt(m.r),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_fold_reports<R: io::Read>(mut input: R) -> Result<(ZooMeta, Vec<FoldReport>), EvalError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let meta = ZooMeta::from_comments(&text)?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut reports = vec![];
    for rec in reader.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64, EvalError> {
            rec.get(i)
                .unwrap_or("")
                .parse()
                .map_err(|_| EvalError::Config(format!("bad number in fold report line {:?}", rec.position().map(|p| p.line()))))
        };
        let r = rec.get(6).unwrap_or("");
        reports.push(FoldReport {
            model: rec.get(0).unwrap_or("").to_string(),
            fold: num(1)? as usize,
            metrics: MetricsReport {
                mse: num(2)?,
                rmse: num(3)?,
                loss: num(4)?,
                mae: num(5)?,
                r: if r.is_empty() { None } else { Some(num(6)?) },
                n: 0,
            },
        });
    }
    Ok((meta, reports))
}

/// Table layout: four rows (Mean, Max, Min, STD) per model panel. The
/// p-value sits on the Mean row; `folds` counts completed folds.
pub fn write_zoo_summary<W: io::Write>(mut w: W, meta: &ZooMeta, report: &ZooReport) -> Result<(), EvalError> {
    for line in meta.comment_lines() {
        writeln!(w, "{line}")?;
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["model", "stat", "mse", "rmse", "loss", "mae", "r", "p", "folds"])?;
    for panel in &report.panels {
        let Some(s) = &panel.summary else {
            out.write_record([panel.model.as_str(), "Mean", "", "", "", "", "", "", "0"])?;
            continue;
        };
        let stats: [(&str, fn(&Summary) -> f64); 4] =
            [("Mean", |s| s.mean), ("Max", |s| s.max), ("Min", |s| s.min), ("STD", |s| s.std)];
        for (i, (label, f)) in stats.iter().enumerate() {
            let p = if i == 0 { fmt_opt(panel.test.map(|t| t.p)) } else { String::new() };
            out.write_record([
                panel.model.clone(),
                label.to_string(),
                fmt(f(&s.mse)),
                fmt(f(&s.rmse)),
                fmt(f(&s.loss)),
                fmt(f(&s.mae)),
                fmt_opt(s.r.as_ref().map(f)),
                p,
                s.folds.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// JSON rendering; non-finite numbers (a degenerate t) are written as null.
pub fn zoo_report_json(report: &ZooReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}
