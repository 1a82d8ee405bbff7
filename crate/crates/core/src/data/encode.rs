use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::dataset::{observed_categories, Column, Dataset};
use super::schema::{ColumnKind, ColumnSchema};
use super::DataError;

/// Category tables per text column. Codes are positions in the sorted list.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EncodingPlan {
    pub categories: BTreeMap<String, Vec<String>>,
    /// Expand each category into its own 0/1 column instead of one code column.
    #[serde(default)]
    pub one_hot: bool,
}

const LOGICAL: [&str; 2] = ["N", "Y"];

/// Lexicographic category lists from the observed values of `ds`.
pub fn fit_encoding(ds: &Dataset, one_hot: bool) -> Result<EncodingPlan, DataError> {
    let mut categories = BTreeMap::new();
    for (s, c) in ds.schema().iter().zip(ds.columns()) {
        match (&s.kind, c) {
            (ColumnKind::Date, _) => {
                return Err(DataError::Invalid(format!("date column {:?} must be engineered before encoding", s.name)))
            }
            (ColumnKind::Logical, _) => {
                categories.insert(s.name.clone(), LOGICAL.iter().map(|v| v.to_string()).collect());
            }
            (ColumnKind::Categorical { .. }, Column::Text(v)) => {
                categories.insert(s.name.clone(), observed_categories(v));
            }
            _ => {}
        }
    }
    Ok(EncodingPlan { categories, one_hot })
}

/// Replaces every text column by integer codes (or one-hot indicator
/// columns). Missing cells stay missing. A value outside the fitted table
/// is an error naming the column and value.
pub fn encode_categoricals(ds: &Dataset, plan: &EncodingPlan) -> Result<Dataset, DataError> {
    let mut schema = vec![];
    let mut columns = vec![];
    for (s, c) in ds.schema().iter().zip(ds.columns()) {
        let Column::Text(values) = c else {
            schema.push(s.clone());
            columns.push(c.clone());
            continue;
        };
        if s.kind == ColumnKind::Date {
            return Err(DataError::Invalid(format!("date column {:?} must be engineered before encoding", s.name)));
        }
        let cats = plan.categories.get(&s.name).ok_or_else(|| DataError::Unfitted(s.name.clone()))?;
        let lookup: BTreeMap<&str, usize> = cats.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let codes: Vec<Option<usize>> = values
            .iter()
            .map(|v| match v {
                None => Ok(None),
                Some(v) => lookup.get(v.as_str()).map(|&i| Some(i)).ok_or_else(|| DataError::UnseenCategory {
                    column: s.name.clone(),
                    value: v.clone(),
                }),
            })
            .collect::<Result<_, _>>()?;
        if plan.one_hot {
            for (i, cat) in cats.iter().enumerate() {
                schema.push(ColumnSchema {
                    name: format!("{}={}", s.name, cat),
                    kind: ColumnKind::Numerical { min: 0.0, max: 1.0 },
                    nullable: s.nullable,
                });
                columns.push(Column::Numeric(codes.iter().map(|c| c.map(|c| f64::from(u8::from(c == i)))).collect()));
            }
        } else {
            schema.push(ColumnSchema {
                name: s.name.clone(),
                kind: ColumnKind::Numerical {
                    min: 0.0,
                    max: cats.len().saturating_sub(1) as f64,
                },
                nullable: s.nullable,
            });
            columns.push(Column::Numeric(codes.iter().map(|c| c.map(|c| c as f64)).collect()));
        }
    }
    Dataset::new(schema, columns, ds.target_name())
}

pub const WEEKDAY: &str = "Admission Weekday";
pub const MONTH: &str = "Admission Month";
pub const YEAR: &str = "Admission Year";

fn parse_date(s: &str) -> Option<NaiveDate> {
    ["%Y-%m-%d", "%m/%d/%Y", "%Y/%m/%d"]
        .iter()
        .find_map(|f| NaiveDate::parse_from_str(s, f).ok())
}

/// Replaces the date column with weekday (Monday = 0), month and year.
/// Without a date column the dataset is returned as is, with a notice.
pub fn engineer_date_features(ds: &Dataset) -> Result<(Dataset, Option<String>), DataError> {
    let Some(di) = ds.schema().iter().position(|s| s.kind == ColumnKind::Date) else {
        let notice = "no admission-date column; weekday/month/year features skipped".to_string();
        log::info!("{notice}");
        return Ok((ds.clone(), Some(notice)));
    };
    let Column::Text(values) = &ds.columns()[di] else {
        return Err(DataError::Invalid("date column must hold text".into()));
    };
    let dates: Vec<Option<NaiveDate>> = values.iter().map(|v| v.as_deref().and_then(parse_date)).collect();
    let unparsed = values.iter().zip(&dates).filter(|(v, d)| v.is_some() && d.is_none()).count();
    let mut schema: Vec<ColumnSchema> = ds.schema().to_vec();
    let mut columns: Vec<Column> = ds.columns().to_vec();
    let nullable = schema[di].nullable;
    schema.remove(di);
    columns.remove(di);
    let parts: [(&str, f64, f64, fn(&NaiveDate) -> f64); 3] = [
        (WEEKDAY, 0.0, 6.0, |d| d.weekday().num_days_from_monday() as f64),
        (MONTH, 1.0, 12.0, |d| d.month() as f64),
        (YEAR, 1900.0, 2100.0, |d| d.year() as f64),
    ];
    for (name, lo, hi, f) in parts {
        schema.push(ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Numerical { min: lo, max: hi },
            nullable,
        });
        columns.push(Column::Numeric(dates.iter().map(|d| d.as_ref().map(f).filter(|v| (lo..=hi).contains(v))).collect()));
    }
    let notice = (unparsed > 0).then(|| format!("{unparsed} admission dates could not be parsed and are treated as missing"));
    Dataset::new(schema, columns, ds.target_name()).map(|d| (d, notice))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::ColumnSchema as C;

    fn gender(values: &[&str]) -> Dataset {
        let n = values.len();
        Dataset::new(
            vec![C::categorical("Gender"), C::logical("ED"), C::numerical("y", 0.0, 10.0)],
            vec![
                Column::Text(values.iter().map(|s| Some(s.to_string())).collect()),
                Column::Text((0..n).map(|i| Some(if i % 2 == 0 { "Y" } else { "N" }.to_string())).collect()),
                Column::Numeric(vec![Some(1.0); n]),
            ],
            "y",
        )
        .unwrap()
    }

    fn codes(ds: &Dataset, name: &str) -> Vec<f64> {
        ds.column(name).unwrap().as_numeric().unwrap().iter().map(|v| v.unwrap()).collect()
    }

    #[test]
    fn lexicographic_label_codes() {
        let ds = gender(&["M", "U", "F", "M"]);
        let plan = fit_encoding(&ds, false).unwrap();
        assert_eq!(plan.categories["Gender"], ["F", "M", "U"]);
        let enc = encode_categoricals(&ds, &plan).unwrap();
        assert_eq!(codes(&enc, "Gender"), [1.0, 2.0, 0.0, 1.0]);
        assert_eq!(codes(&enc, "ED"), [1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn single_category_is_all_zero() {
        let ds = gender(&["F", "F", "F"]);
        let enc = encode_categoricals(&ds, &fit_encoding(&ds, false).unwrap()).unwrap();
        assert_eq!(codes(&enc, "Gender"), [0.0; 3]);
    }

    #[test]
    fn unseen_category_errors() {
        let plan = fit_encoding(&gender(&["F", "M"]), false).unwrap();
        let err = encode_categoricals(&gender(&["F", "X"]), &plan).unwrap_err();
        match err {
            DataError::UnseenCategory { column, value } => assert_eq!((column.as_str(), value.as_str()), ("Gender", "X")),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn one_hot_expands_columns() {
        let ds = gender(&["M", "F"]);
        let enc = encode_categoricals(&ds, &fit_encoding(&ds, true).unwrap()).unwrap();
        assert_eq!(codes(&enc, "Gender=F"), [0.0, 1.0]);
        assert_eq!(codes(&enc, "Gender=M"), [1.0, 0.0]);
        assert_eq!(codes(&enc, "ED=Y"), [1.0, 0.0]);
    }

    fn dated(values: &[Option<&str>]) -> Dataset {
        Dataset::new(
            vec![C::date("Admission Date"), C::numerical("y", 0.0, 10.0)],
            vec![
                Column::Text(values.iter().map(|v| v.map(String::from)).collect()),
                Column::Numeric(vec![Some(1.0); values.len()]),
            ],
            "y",
        )
        .unwrap()
    }

    #[test]
    fn date_parts() {
        let (out, notice) = engineer_date_features(&dated(&[Some("2021-03-15"), Some("03/15/2021"), None])).unwrap();
        assert!(notice.is_none());
        assert!(out.column("Admission Date").is_none());
        let w = out.column(WEEKDAY).unwrap().as_numeric().unwrap();
        let m = out.column(MONTH).unwrap().as_numeric().unwrap();
        let y = out.column(YEAR).unwrap().as_numeric().unwrap();
        assert_eq!((w[0], m[0], y[0]), (Some(0.0), Some(3.0), Some(2021.0)));
        assert_eq!((w[1], m[1], y[1]), (w[0], m[0], y[0]));
        assert_eq!(w[2], None);
    }

    #[test]
    fn no_date_column_is_skipped() {
        let ds = gender(&["F"]);
        let (out, notice) = engineer_date_features(&ds).unwrap();
        assert_eq!(out, ds);
        assert!(notice.is_some());
    }
}
