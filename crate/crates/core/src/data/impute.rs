use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dataset::{observed_categories, Column, Dataset};
use super::schema::IMPUTATION_KEYS;
use super::DataError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub keys: Vec<String>,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self {
            k: 5,
            keys: IMPUTATION_KEYS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Key columns mapped to `[0,1]`: categorical keys by lexicographic rank
/// over `G − 1`, numeric keys by min-max. `None` where the key is missing.
fn key_matrix(ds: &Dataset, keys: &[String]) -> Result<Vec<Vec<Option<f64>>>, DataError> {
    keys.iter()
        .map(|name| {
            let col = ds.column(name).ok_or_else(|| DataError::MissingColumn(name.clone()))?;
            Ok(match col {
                Column::Text(v) => {
                    let cats = observed_categories(v);
                    let span = cats.len().saturating_sub(1).max(1) as f64;
                    let rank: BTreeMap<&str, usize> = cats.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
                    v.iter().map(|c| c.as_deref().map(|c| rank[c] as f64 / span)).collect()
                }
                Column::Numeric(v) => {
                    let (lo, hi) = v.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
                    let span = if hi > lo { hi - lo } else { 1.0 };
                    v.iter().map(|x| x.map(|x| (x - lo) / span)).collect()
                }
            })
        })
        .collect()
}

/// Euclidean distance over the keys observed in `a`; `b` must be complete.
fn distance(keys: &[Vec<Option<f64>>], a: usize, b: usize) -> f64 {
    keys.iter()
        .filter_map(|k| k[a].map(|x| x - k[b].expect("candidate keys observed")))
        .map(|d| d * d)
        .sum::<f64>()
        .sqrt()
}

/// Fills every missing cell from the `k` nearest rows that have all keys
/// and that column observed. Ties in distance go to the lower row index.
/// Numeric cells take the neighbours' mean (summed nearest first);
/// text cells take the most frequent value, ties to the smallest.
/// Neighbour values always come from the input, never from earlier fills.
pub fn knn_impute(ds: &Dataset, params: &KnnParams) -> Result<Dataset, DataError> {
    if params.k == 0 {
        return Err(DataError::Invalid("k must be at least 1".into()));
    }
    if ds.missing_cells() == 0 {
        return Ok(ds.clone());
    }
    let keys = key_matrix(ds, &params.keys)?;
    let n = ds.rows();
    let complete: Vec<bool> = (0..n).map(|r| keys.iter().all(|k| k[r].is_some())).collect();
    let mut columns = ds.columns().to_vec();
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
    for (ci, col) in ds.columns().iter().enumerate() {
        let missing: Vec<usize> = (0..n).filter(|&r| col.is_missing(r)).collect();
        if missing.is_empty() {
            continue;
        }
        let name = &ds.schema()[ci].name;
        if missing.len() == n {
            return Err(DataError::Invalid(format!("column {name:?} is missing in every row")));
        }
        let donors: Vec<usize> = (0..n).filter(|&r| complete[r] && !col.is_missing(r)).collect();
        for &row in &missing {
            order.clear();
            order.extend(donors.iter().filter(|&&j| j != row).map(|&j| (distance(&keys, row, j), j)));
            if order.len() < params.k {
                return Err(DataError::Invalid(format!(
                    "column {name:?}: only {} complete candidate rows for k = {}",
                    order.len(),
                    params.k
                )));
            }
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if order.len() > params.k {
                order.select_nth_unstable_by(params.k - 1, cmp);
                order.truncate(params.k);
            }
            order.sort_unstable_by(cmp);
            match (&mut columns[ci], col) {
                (Column::Numeric(out), Column::Numeric(src)) => {
                    let sum: f64 = order.iter().map(|&(_, j)| src[j].expect("donor observed")).sum();
                    out[row] = Some(sum / params.k as f64);
                }
                (Column::Text(out), Column::Text(src)) => {
                    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                    for &(_, j) in &order {
                        *counts.entry(src[j].as_deref().expect("donor observed")).or_default() += 1;
                    }
                    let best = counts.values().copied().max().unwrap_or(0);
                    let mode = counts.iter().find(|(_, &c)| c == best).map(|(v, _)| v.to_string());
                    out[row] = mode;
                }
                _ => unreachable!("column storage is fixed"),
            }
        }
    }
    let (schema, _, target) = ds.clone().into_parts();
    Dataset::new(schema, columns, &target)
}
