//! Acceptance suite: one PASS/FAIL line per criterion.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use losnet_core::data::{generate_synthetic, prepare, SynthProfile, WrangleOptions};
use losnet_core::eval::{kfold_split, run_model_zoo, welch_t_test, TestKind};
use losnet_core::nn::{zoo_spec, ZooSizes, PROPOSED_MODEL};
use losnet_core::train::metrics_compute;
use losnet_core::{FeatureMatrix, TrainConfig};

use support::gradcheck::{check_kind, LAYER_KINDS};
use support::{gru_oracle, knn_oracle, protocol};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn losnet(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_losnet"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("run losnet")
}

fn data_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap_or_default()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(String::from)
        .collect()
}

fn gradients() -> Verdict {
    let mut worst = (0.0f64, "");
    let mut failed = vec![];
    for kind in LAYER_KINDS {
        let out = check_kind(kind, 20);
        if out.max_rel_err > worst.0 {
            worst = (out.max_rel_err, kind);
        }
        if !out.passed() {
            failed.push(format!("{kind} ({:.2e}, {} cases)", out.max_rel_err, out.cases));
        }
    }
    verdict(
        failed.is_empty(),
        format!("{} layer kinds x 20 seeds x 3 shapes; worst {:.2e} ({}); failed: {failed:?}", LAYER_KINDS.len(), worst.0, worst.1),
    )
}

fn gru_fidelity() -> Verdict {
    let dev = gru_oracle::max_deviation(1000, 2024);
    verdict(dev <= 1e-12, format!("max deviation {dev:.2e} over 1000 scalar cells"))
}

fn metric_identities() -> Verdict {
    let dev = protocol::metric_identity_deviation(1000, 77);
    let m = metrics_compute(&[3.0, 5.0], &[1.0, 5.0]).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let worked = close(m.mse, 2.0)
        && close(m.rmse, 2f64.sqrt())
        && close(m.loss, 1.0)
        && close(m.mae, 1.0)
        && m.r.is_some_and(|r| close(r, -1.0));
    verdict(
        dev <= 1e-9 && worked,
        format!("max identity deviation {dev:.2e}; worked example (MSE, RMSE, Loss, MAE, R) = ({}, {:.6}, {}, {}, {:?})", m.mse, m.rmse, m.loss, m.mae, m.r),
    )
}

fn imputation_oracle() -> Verdict {
    match knn_oracle::compare(50, 500, 2718) {
        Ok(()) => verdict(true, "50 random datasets identical to the exhaustive oracle"),
        Err(e) => verdict(false, e),
    }
}

fn fold_plans() -> Verdict {
    match protocol::fold_plan_violation(200, 31) {
        None => verdict(true, "every n <= 200, k in 2..=10: disjoint, covering, balanced, reproducible"),
        Some(e) => verdict(false, e),
    }
}

fn cardinalities() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let fast = ["--epochs", "2", "--sizes", "compact", "--batch-size", "128"];
    let gen = losnet(&["generate", "--rows", "500", "--seed", "11", "--out", "d.csv"], d);
    if !gen.status.success() {
        return verdict(false, "generate failed");
    }
    let k = 3;
    let mut cv = vec!["cv", "--data", "d.csv", "--model", "all", "--folds", "3", "--out-dir", "zoo"];
    cv.extend(fast);
    let out = losnet(&cv, d);
    let fold_rows = data_rows(&d.join("zoo/fold_reports.csv")).len();
    let summary = std::fs::read_to_string(d.join("zoo/zoo_summary.csv")).unwrap_or_default();
    let p_cells = summary
        .lines()
        .filter(|l| l.contains(",Mean,"))
        .filter(|l| l.split(',').nth(7).is_some_and(|p| !p.is_empty()))
        .count();
    let mut fs = vec!["featsel", "--data", "d.csv", "--folds", "3", "--out-dir", "fs"];
    fs.extend(fast);
    let fs_out = losnet(&fs, d);
    let fs_rows = data_rows(&d.join("fs/featsel.csv")).len();
    let features = data_rows(&d.join("d.csv")).first().map(|l| l.split(',').count() - 1).unwrap_or(0);
    let mut hpo = vec!["hpo", "--data", "d.csv", "--out-dir", "hpo"];
    hpo.extend(fast);
    let hpo_out = losnet(&hpo, d);
    let grid = data_rows(&d.join("hpo/hpo_grid.csv"));
    let cells: usize = grid.iter().map(|l| l.split(',').count() - 1).sum();
    let ok = out.status.success()
        && fs_out.status.success()
        && hpo_out.status.success()
        && fold_rows == 12 * k
        && p_cells == 11
        && fs_rows == features + 1
        && grid.len() == 4
        && cells == 28;
    verdict(
        ok,
        format!(
            "zoo fold reports {fold_rows} (want {}), p-values {p_cells} (want 11), featsel rows {fs_rows} for {features} features, hpo cells {cells} (want 28)",
            12 * k
        ),
    )
}

fn generator_fidelity() -> Verdict {
    let f = protocol::generator_fidelity(100_000, 42);
    let ok = (0.03..=0.05).contains(&f.over_20) && (0.55..=0.70).contains(&f.correlation) && f.min >= 0.0 && f.max <= 140.0;
    verdict(
        ok,
        format!(
            "P(LoS > 20) = {:.4}, corr(costs, LoS) = {:.4}, LoS in [{}, {}]",
            f.over_20, f.correlation, f.min, f.max
        ),
    )
}

fn ordering() -> Verdict {
    let sizes = ZooSizes::compact();
    let (mut passed, mut failed) = (0, 0);
    let mut lines = vec![];
    for seed in 1..=5u64 {
        if passed >= 4 || failed >= 2 {
            break;
        }
        let ds = generate_synthetic(20_000, seed, &SynthProfile::default()).unwrap();
        let (encoded, _, _) = prepare(&ds, &WrangleOptions::default()).unwrap();
        let data = FeatureMatrix::from_dataset(&encoded).unwrap();
        let plan = kfold_split(data.rows(), 10, seed).unwrap();
        let specs: Vec<_> = ["gru", PROPOSED_MODEL].iter().map(|n| zoo_spec(n, data.features(), sizes).unwrap()).collect();
        let config = TrainConfig {
            seed,
            max_epochs: 3,
            batch_size: 256,
            learning_rate: 3e-3,
            patience: 3,
            ..TrainConfig::default()
        };
        let run = run_model_zoo(&data, &specs, &config, &plan, Some(PROPOSED_MODEL), TestKind::Welch).unwrap();
        let r = |i: usize| -> Vec<f64> { run.reports.iter().filter(|f| f.model == specs[i].name).filter_map(|f| f.metrics.r).collect() };
        let (gru, hybrid) = (r(0), r(1));
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let gap = mean(&hybrid) - mean(&gru);
        let p = welch_t_test(&hybrid, &gru).map(|t| t.p).unwrap_or(1.0);
        let ok = gru.len() == 10 && hybrid.len() == 10 && gap >= 0.02 && p < 0.05;
        if ok {
            passed += 1;
        } else {
            failed += 1;
        }
        lines.push(format!("seed {seed}: R {:.3} vs {:.3}, p {p:.1e}", mean(&hybrid), mean(&gru)));
    }
    verdict(passed >= 4, format!("{passed} seeds hold ({})", lines.join("; ")))
}

fn t_test_oracle() -> Verdict {
    let t = welch_t_test(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
    let same = welch_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
    let ok = (t.t + 3.674).abs() <= 1e-3 && (t.df - 4.0).abs() <= 1e-12 && (t.p - 0.0213).abs() <= 5e-4 && same.p == 1.0;
    verdict(ok, format!("t = {:.6}, df = {}, p = {:.6}; identical samples p = {}", t.t, t.df, t.p, same.p))
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = losnet(&["generate", "--rows", "400", "--seed", "3", "--out", "d.csv"], d);
    if !gen.status.success() {
        return verdict(false, "generate failed");
    }
    let cv = |out: &str, threads: &str| {
        losnet(
            &["cv", "--data", "d.csv", "--model", "all", "--folds", "2", "--epochs", "2", "--sizes", "compact", "--threads", threads, "--out-dir", out],
            d,
        )
    };
    let runs = [cv("a", "1"), cv("b", "1"), cv("c", "3")];
    if runs.iter().any(|r| !r.status.success()) {
        return verdict(false, "cv failed");
    }
    let mut files = vec![];
    for entry in walk(&d.join("a")) {
        let rel = entry.strip_prefix(d.join("a")).unwrap().to_path_buf();
        files.push(rel);
    }
    files.sort();
    let same = |other: &str| {
        files
            .iter()
            .all(|f| std::fs::read(d.join("a").join(f)).ok() == std::fs::read(d.join(other).join(f)).ok())
            && walk(&d.join(other)).len() == files.len()
    };
    let (b, c) = (same("b"), same("c"));
    verdict(b, format!("{} files byte-identical across two single-thread runs: {b}; and against a 3-thread run: {c}", files.len()))
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = vec![];
    for e in std::fs::read_dir(dir).into_iter().flatten().flatten() {
        let p = e.path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Verdict); 10] = [
        ("gradient correctness", Duration::from_secs(60), gradients),
        ("GRU equation fidelity", Duration::from_secs(5), gru_fidelity),
        ("metric identities", Duration::from_secs(60), metric_identities),
        ("imputation oracle", Duration::from_secs(30), imputation_oracle),
        ("fold-plan properties", Duration::from_secs(5), fold_plans),
        ("protocol cardinalities", Duration::from_secs(600), cardinalities),
        ("synthetic-distribution fidelity", Duration::from_secs(60), generator_fidelity),
        ("hybrid beats plain GRU", Duration::from_secs(7200), ordering),
        ("t-test oracle", Duration::from_secs(60), t_test_oracle),
        ("determinism", Duration::from_secs(600), determinism),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failures = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        let took = start.elapsed();
        let pass = v.pass && took <= *budget;
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {} [{:.1}s, budget {}s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
