use serde::{Deserialize, Serialize};

use super::TrainError;

/// Regression metrics on one evaluation set. `r` is `None` when the targets
/// have zero variance and the coefficient is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: f64,
    pub rmse: f64,
    pub loss: f64,
    pub mae: f64,
    pub r: Option<f64>,
    pub n: usize,
}

fn check_pair(y: &[f64], yhat: &[f64]) -> Result<(), TrainError> {
    if y.len() != yhat.len() {
        return Err(TrainError::LengthMismatch {
            targets: y.len(),
            predictions: yhat.len(),
        });
    }
    if y.is_empty() {
        return Err(TrainError::Empty("metric inputs"));
    }
    if let Some(v) = y.iter().chain(yhat).find(|v| !v.is_finite()) {
        return Err(TrainError::Config(format!("non-finite metric input {v}")));
    }
    Ok(())
}

/// `(1/2N) Σ (y_i − ŷ_i)²`.
pub fn loss_half_mse(y: &[f64], yhat: &[f64]) -> Result<f64, TrainError> {
    check_pair(y, yhat)?;
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sse / (2.0 * y.len() as f64))
}

/// Gradient of [`loss_half_mse`] w.r.t. each prediction: `(ŷ_i − y_i)/N`.
pub fn loss_half_mse_grad(y: &[f64], yhat: &[f64]) -> Result<Vec<f64>, TrainError> {
    check_pair(y, yhat)?;
    let n = y.len() as f64;
    Ok(y.iter().zip(yhat).map(|(a, b)| (b - a) / n).collect())
}

pub fn metrics_compute(y: &[f64], yhat: &[f64]) -> Result<MetricsReport, TrainError> {
    check_pair(y, yhat)?;
    let n = y.len() as f64;
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    let sae: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum();
    let mean = y.iter().sum::<f64>() / n;
    let sst: f64 = y.iter().map(|a| (a - mean) * (a - mean)).sum();
    let mse = sse / n;
    Ok(MetricsReport {
        mse,
        rmse: mse.sqrt(),
        loss: mse / 2.0,
        mae: sae / n,
        r: (sst > 0.0).then(|| 1.0 - sse / sst),
        n: y.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_example() {
        let m = metrics_compute(&[3.0, 5.0], &[1.0, 5.0]).unwrap();
        assert_eq!(m.mse, 2.0);
        assert!((m.rmse - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.loss, 1.0);
        assert_eq!(m.mae, 1.0);
        assert_eq!(m.r, Some(-1.0));
        assert_eq!(loss_half_mse(&[3.0, 5.0], &[1.0, 5.0]).unwrap(), 1.0);
    }

    #[test]
    fn perfect_and_mean_predictions() {
        let y = [1.0, 4.0, 2.0, 7.0];
        let m = metrics_compute(&y, &y).unwrap();
        assert_eq!((m.mse, m.rmse, m.loss, m.mae, m.r), (0.0, 0.0, 0.0, 0.0, Some(1.0)));
        let mean = [3.5; 4];
        assert!(metrics_compute(&y, &mean).unwrap().r.unwrap().abs() < 1e-15);
    }

    #[test]
    fn constant_targets_leave_r_undefined() {
        let m = metrics_compute(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.r, None);
        assert!(metrics_compute(&[2.0], &[2.0]).unwrap().r.is_none());
    }

    #[test]
    fn gradient_matches_difference_quotient() {
        assert_eq!(loss_half_mse_grad(&[3.0], &[1.0]).unwrap(), vec![-2.0]);
        let y = [0.3, -1.2, 2.5];
        let p = [0.1, 0.4, 2.0];
        let g = loss_half_mse_grad(&y, &p).unwrap();
        for i in 0..3 {
            let h = 1e-6;
            let mut a = p;
            let mut b = p;
            a[i] += h;
            b[i] -= h;
            let fd = (loss_half_mse(&y, &a).unwrap() - loss_half_mse(&y, &b).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(loss_half_mse(&[], &[]), Err(TrainError::Empty(_))));
        assert!(matches!(metrics_compute(&[1.0], &[1.0, 2.0]), Err(TrainError::LengthMismatch { .. })));
        assert!(metrics_compute(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
    }

    fn pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..40).prop_flat_map(|n| (prop::collection::vec(-50.0..50.0f64, n), prop::collection::vec(-50.0..50.0f64, n)))
    }

    proptest! {
        #[test]
        fn identities_hold((y, p) in pairs()) {
            let m = metrics_compute(&y, &p).unwrap();
            prop_assert!((m.rmse * m.rmse - m.mse).abs() <= 1e-12 * m.mse.max(1.0));
            prop_assert!((m.loss - m.mse / 2.0).abs() <= 1e-12 * m.mse.max(1.0));
            prop_assert!(m.mae <= m.rmse + 1e-12);
            if let Some(r) = m.r {
                prop_assert!(r <= 1.0);
            }
        }

        #[test]
        fn r_is_shift_invariant((y, p) in pairs(), c in -100.0..100.0f64) {
            let a = metrics_compute(&y, &p).unwrap().r;
            let ys: Vec<f64> = y.iter().map(|v| v + c).collect();
            let ps: Vec<f64> = p.iter().map(|v| v + c).collect();
            let b = metrics_compute(&ys, &ps).unwrap().r;
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0)),
                (a, b) => prop_assert_eq!(a.is_none(), b.is_none()),
            }
        }
    }
}
