use serde::{Deserialize, Serialize};

use super::dataset::{Column, Dataset};
use super::schema::{ColumnKind, ColumnSchema};
use super::DataError;
use crate::tensor::Tensor;

/// `v ↦ (v − min)/(max − min)`; a constant column maps to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    /// `None` when `values` is empty.
    pub fn fit<I: IntoIterator<Item = f64>>(values: I) -> Option<Self> {
        let (min, max) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        (min <= max).then_some(Self { min, max })
    }

    pub fn is_constant(&self) -> bool {
        self.max <= self.min
    }

    pub fn apply(&self, v: f64) -> f64 {
        if self.is_constant() {
            0.0
        } else {
            (v - self.min) / (self.max - self.min)
        }
    }

    pub fn inverse(&self, v: f64) -> f64 {
        if self.is_constant() {
            self.min
        } else {
            self.min + v * (self.max - self.min)
        }
    }
}

/// Fitted ranges for named numeric columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalePlan {
    pub columns: Vec<(String, MinMax)>,
}

impl ScalePlan {
    /// Ranges over the observed cells of `rows` (every row when `None`).
    pub fn fit(ds: &Dataset, rows: Option<&[usize]>) -> Result<Self, DataError> {
        let all: Vec<usize>;
        let rows = match rows {
            Some(r) => r,
            None => {
                all = (0..ds.rows()).collect();
                &all
            }
        };
        let mut columns = vec![];
        for (s, c) in ds.schema().iter().zip(ds.columns()) {
            let Column::Numeric(v) = c else { continue };
            let mm = MinMax::fit(rows.iter().filter_map(|&r| v[r]))
                .ok_or_else(|| DataError::Invalid(format!("column {:?} has no observed values to fit", s.name)))?;
            if mm.is_constant() {
                log::info!("column {:?} is constant ({}) and scales to 0", s.name, mm.min);
            }
            columns.push((s.name.clone(), mm));
        }
        Ok(Self { columns })
    }

    pub fn get(&self, name: &str) -> Option<&MinMax> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }
}

/// Min-max scales every numeric column with `plan`, or with a plan fitted
/// on all rows when `plan` is `None`. Text columns must be encoded first.
pub fn scale_minmax(ds: &Dataset, plan: Option<&ScalePlan>) -> Result<(Dataset, ScalePlan), DataError> {
    let plan = match plan {
        Some(p) => p.clone(),
        None => ScalePlan::fit(ds, None)?,
    };
    let mut schema = vec![];
    let mut columns = vec![];
    for (s, c) in ds.schema().iter().zip(ds.columns()) {
        let Column::Numeric(v) = c else {
            return Err(DataError::Invalid(format!("column {:?} must be encoded before scaling", s.name)));
        };
        let mm = plan.get(&s.name).ok_or_else(|| DataError::Unfitted(s.name.clone()))?;
        let (lo, hi) = s.bounds().unwrap_or((mm.min, mm.max));
        schema.push(ColumnSchema {
            name: s.name.clone(),
            kind: ColumnKind::Numerical {
                min: mm.apply(lo).min(0.0),
                max: mm.apply(hi).max(1.0),
            },
            nullable: s.nullable,
        });
        columns.push(Column::Numeric(v.iter().map(|x| x.map(|x| mm.apply(x))).collect()));
    }
    Ok((Dataset::new(schema, columns, ds.target_name())?, plan))
}

/// Undoes [`scale_minmax`] for one column's values.
pub fn inverse_scale(plan: &ScalePlan, column: &str, values: &[f64]) -> Result<Vec<f64>, DataError> {
    let mm = plan.get(column).ok_or_else(|| DataError::Unfitted(column.to_string()))?;
    Ok(values.iter().map(|&v| mm.inverse(v)).collect())
}

/// Dense, fully observed numeric features plus the target, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FeatureMatrix {
    /// Requires an encoded dataset without missing cells.
    pub fn from_dataset(ds: &Dataset) -> Result<Self, DataError> {
        let names = ds.feature_names();
        let n = ds.rows();
        let cols: Vec<&[Option<f64>]> = names
            .iter()
            .map(|name| {
                ds.column(name)
                    .and_then(Column::as_numeric)
                    .ok_or_else(|| DataError::Invalid(format!("column {name:?} is not numeric; encode first")))
            })
            .collect::<Result<_, _>>()?;
        let mut x = Vec::with_capacity(n * names.len());
        for r in 0..n {
            for (c, name) in cols.iter().zip(&names) {
                x.push(c[r].ok_or_else(|| DataError::Invalid(format!("column {name:?} row {r} is missing; impute first")))?);
            }
        }
        Ok(Self { names, x, y: ds.target() })
    }

    pub fn rows(&self) -> usize {
        self.y.len()
    }

    pub fn features(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.x.iter().skip(j).step_by(self.features()).copied()
    }

    pub fn without_feature(&self, name: &str) -> Result<Self, DataError> {
        let j = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))?;
        let f = self.features();
        let x = self
            .x
            .chunks(f)
            .flat_map(|row| row.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, &v)| v))
            .collect();
        let mut names = self.names.clone();
        names.remove(j);
        Ok(Self { names, x, y: self.y.clone() })
    }
}

/// Per-feature and target ranges fitted on a subset of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixScaler {
    pub features: Vec<MinMax>,
    pub target: MinMax,
}

impl MatrixScaler {
    pub fn fit(m: &FeatureMatrix, rows: &[usize]) -> Result<Self, DataError> {
        if rows.is_empty() {
            return Err(DataError::Empty("no rows to fit scaling on".into()));
        }
        let f = m.features();
        let features = (0..f)
            .map(|j| MinMax::fit(rows.iter().map(|&r| m.x[r * f + j])).expect("non-empty rows"))
            .collect();
        let target = MinMax::fit(rows.iter().map(|&r| m.y[r])).expect("non-empty rows");
        Ok(Self { features, target })
    }

    /// Scaled `[rows x F]` features and scaled targets for `rows`.
    pub fn transform(&self, m: &FeatureMatrix, rows: &[usize]) -> Result<(Tensor, Vec<f64>), DataError> {
        let f = m.features();
        let mut x = Vec::with_capacity(rows.len() * f);
        for &r in rows {
            x.extend(m.x[r * f..(r + 1) * f].iter().zip(&self.features).map(|(&v, mm)| mm.apply(v)));
        }
        let y = rows.iter().map(|&r| self.target.apply(m.y[r])).collect();
        Ok((Tensor::new(&[rows.len(), f], x)?, y))
    }

    pub fn inverse_target(&self, scaled: &[f64]) -> Vec<f64> {
        scaled.iter().map(|&v| self.target.inverse(v)).collect()
    }
}
