//! Direct checks of fold plans, metric identities and generator statistics.

use losnet_core::data::{generate_synthetic, Column, SynthProfile, COSTS};
use losnet_core::eval::kfold_split;
use losnet_core::train::metrics_compute;
use losnet_core::Rng;

/// First violated fold-plan property for any `n <= max_n`, `k` in 2..=10.
pub fn fold_plan_violation(max_n: usize, seed: u64) -> Option<String> {
    for k in 2..=10usize {
        for n in k..=max_n {
            let plan = kfold_split(n, k, seed).ok()?;
            let mut seen = vec![0usize; n];
            let mut sizes = vec![];
            for f in 0..k {
                let test = plan.test_rows(f);
                sizes.push(test.len());
                for &r in test {
                    seen[r] += 1;
                }
                let train = plan.train_rows(f);
                if train.len() + test.len() != n || train.iter().any(|r| test.contains(r)) {
                    return Some(format!("n={n} k={k} fold {f}: train rows do not complement test rows"));
                }
            }
            if seen.iter().any(|&c| c != 1) {
                return Some(format!("n={n} k={k}: some row is not in exactly one fold"));
            }
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            if hi - lo > 1 {
                return Some(format!("n={n} k={k}: fold sizes {lo}..{hi}"));
            }
            let again = kfold_split(n, k, seed).unwrap();
            if (0..k).any(|f| again.test_rows(f) != plan.test_rows(f)) {
                return Some(format!("n={n} k={k}: plan changes under the same seed"));
            }
        }
    }
    None
}

/// Largest deviation from the metric identities over `trials` random pairs.
pub fn metric_identity_deviation(trials: usize, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let n = 2 + rng.below(60);
        let y: Vec<f64> = (0..n).map(|_| rng.uniform_range(-20.0, 20.0)).collect();
        let p: Vec<f64> = (0..n).map(|_| rng.uniform_range(-20.0, 20.0)).collect();
        let m = metrics_compute(&y, &p).unwrap();
        worst = worst.max((m.rmse * m.rmse - m.mse).abs() / m.mse.max(1.0));
        worst = worst.max((m.loss - m.mse / 2.0).abs());
        worst = worst.max(m.mae - m.rmse);
        let same = metrics_compute(&y, &y).unwrap();
        worst = worst.max((same.r.unwrap() - 1.0).abs());
        let mean = y.iter().sum::<f64>() / n as f64;
        let flat = metrics_compute(&y, &vec![mean; n]).unwrap();
        worst = worst.max(flat.r.unwrap().abs());
    }
    worst
}

pub struct Fidelity {
    pub over_20: f64,
    pub correlation: f64,
    pub min: f64,
    pub max: f64,
}

/// Statistics of a generated sample, computed from the raw columns.
pub fn generator_fidelity(rows: usize, seed: u64) -> Fidelity {
    let ds = generate_synthetic(rows, seed, &SynthProfile::default()).unwrap();
    let los = ds.target();
    let Some(Column::Numeric(costs)) = ds.column(COSTS) else { panic!("costs column") };
    let (mut xs, mut ys) = (vec![], vec![]);
    for (c, &l) in costs.iter().zip(&los) {
        if let Some(c) = c {
            xs.push(*c);
            ys.push(l);
        }
    }
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    Fidelity {
        over_20: los.iter().filter(|&&v| v > 20.0).count() as f64 / los.len() as f64,
        correlation: cov / (vx * vy).sqrt(),
        min: los.iter().copied().fold(f64::INFINITY, f64::min),
        max: los.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}
