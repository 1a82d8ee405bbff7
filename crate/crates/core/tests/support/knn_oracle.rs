//! Exhaustive nearest-neighbour imputation written without the library's
//! selection shortcuts, plus random datasets to run both on.

use losnet_core::data::{knn_impute, Column, ColumnSchema, Dataset, KnnParams};
use losnet_core::Rng;

const KEYS: [&str; 4] = ["k_cat_a", "k_num_a", "k_cat_b", "k_num_b"];

/// Random dataset of `rows` rows with keys, extra numeric and text columns,
/// low-cardinality values (to force distance and vote ties) and
/// `missing_rate` blank cells outside the target.
pub fn random_case(rng: &mut Rng, rows: usize, missing_rate: f64) -> (Dataset, KnnParams) {
    let cats = ["a", "b", "c", "d"];
    let text = |levels: usize, rng: &mut Rng| -> Column {
        Column::Text(
            (0..rows)
                .map(|_| (rng.uniform() >= missing_rate).then(|| cats[rng.below(levels)].to_string()))
                .collect(),
        )
    };
    let k_cat_a = text(3, rng);
    let k_cat_b = text(4, rng);
    let t1 = text(2, rng);
    let t2 = text(4, rng);
    let num = |levels: usize, rng: &mut Rng| -> Column {
        Column::Numeric(
            (0..rows)
                .map(|_| (rng.uniform() >= missing_rate).then(|| (rng.below(levels) as f64) * 0.37 + 1.0))
                .collect(),
        )
    };
    let k_num_a = num(5, rng);
    let k_num_b = num(3, rng);
    let v1 = num(50, rng);
    let v2 = num(7, rng);
    let target = Column::Numeric((0..rows).map(|_| Some(rng.uniform_range(0.0, 10.0))).collect());
    let schema = vec![
        ColumnSchema::categorical(KEYS[0]),
        ColumnSchema::numerical(KEYS[1], 0.0, 100.0),
        ColumnSchema::categorical(KEYS[2]),
        ColumnSchema::numerical(KEYS[3], 0.0, 100.0),
        ColumnSchema::categorical("t1"),
        ColumnSchema::categorical("t2"),
        ColumnSchema::numerical("v1", 0.0, 100.0),
        ColumnSchema::numerical("v2", 0.0, 100.0),
        ColumnSchema::numerical("y", 0.0, 100.0),
    ];
    let ds = Dataset::new(schema, vec![k_cat_a, k_num_a, k_cat_b, k_num_b, t1, t2, v1, v2, target], "y").unwrap();
    let params = KnnParams {
        k: 1 + rng.below(6),
        keys: KEYS.iter().map(|s| s.to_string()).collect(),
    };
    (ds, params)
}

/// Key column scaled to [0, 1]: categories by sorted rank, numbers by range.
fn scaled_key(col: &Column) -> Vec<Option<f64>> {
    match col {
        Column::Text(v) => {
            let mut levels: Vec<&String> = v.iter().flatten().collect();
            levels.sort();
            levels.dedup();
            let span = if levels.len() > 1 { (levels.len() - 1) as f64 } else { 1.0 };
            v.iter()
                .map(|c| c.as_ref().map(|c| levels.iter().position(|l| *l == c).unwrap() as f64 / span))
                .collect()
        }
        Column::Numeric(v) => {
            let observed: Vec<f64> = v.iter().flatten().copied().collect();
            let lo = observed.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = observed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = if hi > lo { hi - lo } else { 1.0 };
            v.iter().map(|x| x.map(|x| (x - lo) / span)).collect()
        }
    }
}

/// For each missing cell: rank every other row whose keys are all present
/// and whose cell is observed by distance over the row's own present keys
/// (ties by row index), take the first `k`, then average (nearest first) or
/// take the most frequent value (ties to the smallest).
pub fn oracle(ds: &Dataset, params: &KnnParams) -> Vec<Column> {
    let keys: Vec<Vec<Option<f64>>> = params.keys.iter().map(|k| scaled_key(ds.column(k).unwrap())).collect();
    let n = ds.rows();
    let mut out = ds.columns().to_vec();
    for (ci, col) in ds.columns().iter().enumerate() {
        for row in 0..n {
            if !col.is_missing(row) {
                continue;
            }
            let mut ranked: Vec<(f64, usize)> = vec![];
            for j in 0..n {
                if j == row || col.is_missing(j) || keys.iter().any(|k| k[j].is_none()) {
                    continue;
                }
                let mut sq = 0.0;
                for k in &keys {
                    if let (Some(a), Some(b)) = (k[row], k[j]) {
                        sq += (a - b) * (a - b);
                    }
                }
                ranked.push((sq.sqrt(), j));
            }
            ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let chosen: Vec<usize> = ranked.iter().take(params.k).map(|p| p.1).collect();
            assert_eq!(chosen.len(), params.k, "oracle needs k donors");
            match (&mut out[ci], col) {
                (Column::Numeric(dst), Column::Numeric(src)) => {
                    let mut sum = 0.0;
                    for &j in &chosen {
                        sum += src[j].unwrap();
                    }
                    dst[row] = Some(sum / params.k as f64);
                }
                (Column::Text(dst), Column::Text(src)) => {
                    let mut values: Vec<&String> = chosen.iter().map(|&j| src[j].as_ref().unwrap()).collect();
                    values.sort();
                    let mut best: Option<(&String, usize)> = None;
                    let mut i = 0;
                    while i < values.len() {
                        let run = values[i..].iter().take_while(|v| **v == values[i]).count();
                        if best.map(|(_, c)| run > c).unwrap_or(true) {
                            best = Some((values[i], run));
                        }
                        i += run;
                    }
                    dst[row] = best.map(|(v, _)| v.clone());
                }
                _ => unreachable!(),
            }
        }
    }
    out
}

/// Runs `cases` random datasets (up to `max_rows` rows, 5-20% missing) and
/// returns a description of the first mismatch.
pub fn compare(cases: usize, max_rows: usize, seed: u64) -> Result<(), String> {
    for case in 0..cases {
        let mut rng = Rng::derive(seed, &[case as u64]);
        let rows = 40 + rng.below(max_rows - 39);
        let rate = rng.uniform_range(0.05, 0.20);
        let (ds, params) = random_case(&mut rng, rows, rate);
        let got = knn_impute(&ds, &params).map_err(|e| format!("case {case}: {e}"))?;
        let want = oracle(&ds, &params);
        for (ci, (g, w)) in got.columns().iter().zip(&want).enumerate() {
            if g != w {
                return Err(format!("case {case} ({rows} rows, k={}): column {} differs", params.k, ds.schema()[ci].name));
            }
        }
    }
    Ok(())
}
