use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    /// Unequal-variance two-sample test.
    #[default]
    Welch,
    /// Test on per-fold differences.
    Paired,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
    /// Both samples had zero variance and different means.
    pub degenerate: bool,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Two-sided tail of Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t))
}

fn check(a: &[f64], b: &[f64]) -> Result<(), EvalError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(EvalError::Config(format!(
            "t-test needs at least 2 values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(EvalError::Config("t-test samples must be finite".into()));
    }
    Ok(())
}

fn constant_case(diff: f64, df: f64) -> TTest {
    if diff == 0.0 {
        TTest {
            t: 0.0,
            df,
            p: 1.0,
            degenerate: false,
        }
    } else {
        TTest {
            t: diff.signum() * f64::INFINITY,
            df,
            p: 0.0,
            degenerate: true,
        }
    }
}

/// Welch statistic with Satterthwaite degrees of freedom.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest, EvalError> {
    check(a, b)?;
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        return Ok(constant_case(ma - mb, (a.len() + b.len() - 2) as f64));
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() - 1) as f64 + sb * sb / (b.len() - 1) as f64);
    Ok(TTest {
        t,
        df,
        p: student_t_two_sided(t, df),
        degenerate: false,
    })
}

/// One-sample test on `a_i − b_i`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest, EvalError> {
    check(a, b)?;
    if a.len() != b.len() {
        return Err(EvalError::Config(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (md, vd) = mean_var(&d);
    let n = d.len() as f64;
    let df = n - 1.0;
    if vd == 0.0 {
        return Ok(constant_case(md, df));
    }
    let t = md / (vd / n).sqrt();
    Ok(TTest {
        t,
        df,
        p: student_t_two_sided(t, df),
        degenerate: false,
    })
}

pub fn t_test(kind: TestKind, a: &[f64], b: &[f64]) -> Result<TTest, EvalError> {
    match kind {
        TestKind::Welch => welch_t_test(a, b),
        TestKind::Paired => paired_t_test(a, b),
    }
}
