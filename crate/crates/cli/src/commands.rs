use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

use losnet_core::data::{
    generate_synthetic, los_summary, parse_records, prepare, sparcs_schema, wrangle, write_rejections, Dataset, FeatureMatrix,
    KnnParams, SynthProfile, WrangleOptions,
};
use losnet_core::eval::{
    build_zoo_report, kfold_split, read_fold_reports, run_model_zoo, write_fold_reports, write_zoo_summary, ZooMeta, ZooReport,
};
use losnet_core::nn::{display_name, zoo, zoo_spec, ModelSpec, ZooSizes, PROPOSED_MODEL, ZOO_NAMES};
use losnet_core::studies::{feature_elimination_study, grid_search_hpo, greedy_layer_search, holdout_split, HpoPlan};

use crate::args::{Cli, Command, CvArgs, DataArgs, DepthArgs, FeatselArgs, GenerateArgs, HpoArgs, ReportArgs, WrangleArgs};
use crate::output::{ensure_dir, ensure_parent, write_atomic, write_json};

pub fn run(cli: Cli) -> Result<()> {
    if cli.global.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.global.threads)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let seed = cli.global.seed;
    match &cli.command {
        Command::Generate(a) => generate(a, seed),
        Command::Wrangle(a) => wrangle_cmd(a, seed),
        Command::Cv(a) => cv(a, seed),
        Command::Featsel(a) => featsel(a, seed),
        Command::Hpo(a) => hpo(a, seed),
        Command::Depth(a) => depth(a, seed),
        Command::Report(a) => report(a),
    }
}

fn seed_line(w: &mut dyn Write, seed: u64) -> Result<()> {
    writeln!(w, "# seed={seed}")?;
    Ok(())
}

fn generate(a: &GenerateArgs, seed: u64) -> Result<()> {
    if !(0.0..1.0).contains(&a.missing_rate) {
        bail!("--missing-rate must be in [0, 1), got {}", a.missing_rate);
    }
    ensure_parent(&a.out)?;
    let profile = SynthProfile {
        missing_rate: a.missing_rate,
        include_date: a.include_date,
        ..SynthProfile::default()
    };
    let ds = generate_synthetic(a.rows as usize, seed, &profile)?;
    write_atomic(&a.out, |w| {
        seed_line(w, seed)?;
        ds.write_csv(w)?;
        Ok(())
    })?;
    let s = los_summary(&ds);
    println!("wrote {} rows to {}", s.rows, a.out.display());
    println!("LoS > 20 days: {:.2}%", s.over_20 * 100.0);
    match s.cost_correlation {
        Some(c) => println!("corr(Total Costs, LoS): {c:.3}"),
        None => println!("corr(Total Costs, LoS): undefined"),
    }
    println!("LoS range: {} to {}", s.min, s.max);
    Ok(())
}

fn read_dataset(a: &DataArgs) -> Result<Dataset> {
    let file = File::open(&a.data).with_context(|| format!("opening {}", a.data.display()))?;
    let outcome = parse_records(BufReader::new(file), &sparcs_schema()).with_context(|| format!("parsing {}", a.data.display()))?;
    if !outcome.rejections.is_empty() {
        log::warn!("{} rows rejected from {}", outcome.rejections.len(), a.data.display());
    }
    if outcome.invalid_cells > 0 {
        log::warn!("{} invalid cells treated as missing", outcome.invalid_cells);
    }
    Ok(outcome.dataset)
}

fn wrangle_options(a: &DataArgs) -> WrangleOptions {
    WrangleOptions {
        knn: KnnParams {
            k: a.knn,
            ..KnnParams::default()
        },
        one_hot: a.one_hot,
    }
}

/// Imputed and encoded features in original units; scaling happens per fold.
fn load_features(a: &DataArgs) -> Result<FeatureMatrix> {
    let ds = read_dataset(a)?;
    let (encoded, _, _) = prepare(&ds, &wrangle_options(a))?;
    Ok(FeatureMatrix::from_dataset(&encoded)?)
}

fn wrangle_cmd(a: &WrangleArgs, seed: u64) -> Result<()> {
    ensure_parent(&a.out)?;
    ensure_parent(&a.plan_out)?;
    let file = File::open(&a.data.data).with_context(|| format!("opening {}", a.data.data.display()))?;
    let outcome = parse_records(BufReader::new(file), &sparcs_schema())?;
    let (scaled, plan) = wrangle(&outcome.dataset, &wrangle_options(&a.data))?;
    write_atomic(&a.out, |w| {
        seed_line(w, seed)?;
        scaled.write_csv(w)?;
        Ok(())
    })?;
    write_json(&a.plan_out, seed, "plan", &plan)?;
    if !outcome.rejections.is_empty() {
        let path = a.out.with_extension("rejections.csv");
        write_atomic(&path, |w| {
            seed_line(w, seed)?;
            write_rejections(&outcome.rejections, w)?;
            Ok(())
        })?;
        println!("{} rows rejected; see {}", outcome.rejections.len(), path.display());
    }
    println!(
        "wrote {} rows x {} features to {} and the plan to {}",
        scaled.rows(),
        scaled.feature_names().len(),
        a.out.display(),
        a.plan_out.display()
    );
    Ok(())
}

/// A zoo name or a JSON spec file.
fn resolve_model(name: &str, features: usize, sizes: ZooSizes) -> Result<ModelSpec> {
    if let Some(spec) = zoo_spec(name, features, sizes) {
        return Ok(spec);
    }
    let path = Path::new(name);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        let mut spec = ModelSpec::from_json(&text).with_context(|| format!("parsing model spec {name}"))?;
        if spec.name.is_empty() {
            spec.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "custom".into());
        }
        return Ok(spec.with_input_features(features));
    }
    bail!("unknown model {name:?}; valid names: {}, all, or a JSON spec file", ZOO_NAMES.join(", "))
}

fn check_folds(folds: usize) -> Result<()> {
    if folds < 2 {
        bail!("--folds must be at least 2, got {folds}");
    }
    Ok(())
}

fn print_report(report: &ZooReport) {
    println!(
        "{:<14} {:>6} {:>8} {:>8} {:>8} {:>7} {:>10}",
        "model", "folds", "RMSE", "MAE", "Loss", "R", "p"
    );
    for p in &report.panels {
        let Some(s) = &p.summary else {
            println!("{:<14} {:>6} (every fold failed)", display_name(&p.model), 0);
            continue;
        };
        let r = s.r.map(|r| format!("{:.3}", r.mean)).unwrap_or_else(|| "-".into());
        let pv = p.test.map(|t| format!("{:.3e}", t.p)).unwrap_or_else(|| "-".into());
        println!(
            "{:<14} {:>6} {:>8.3} {:>8.3} {:>8.3} {:>7} {:>10}",
            display_name(&p.model),
            s.folds,
            s.rmse.mean,
            s.mae.mean,
            s.loss.mean,
            r,
            pv
        );
    }
}

fn write_summaries(dir: &Path, meta: &ZooMeta, report: &ZooReport) -> Result<()> {
    write_atomic(&dir.join("zoo_summary.csv"), |w| Ok(write_zoo_summary(w, meta, report)?))?;
    write_json(&dir.join("zoo_report.json"), meta.seed, "report", report)
}

fn cv(a: &CvArgs, seed: u64) -> Result<()> {
    check_folds(a.folds)?;
    let config = a.train.config(seed);
    config.validate()?;
    let sizes = a.train.sizes.zoo_sizes();
    let data = load_features(&a.data)?;
    let (specs, proposed) = if a.model == "all" {
        (zoo(data.features(), sizes), Some(PROPOSED_MODEL.to_string()))
    } else {
        (vec![resolve_model(&a.model, data.features(), sizes)?], None)
    };
    ensure_dir(&a.out_dir)?;
    let history_dir = a.out_dir.join("history");
    ensure_dir(&history_dir)?;
    let plan = kfold_split(data.rows(), a.folds, seed)?;
    let run = run_model_zoo(&data, &specs, &config, &plan, proposed.as_deref(), a.test.into())?;
    let meta = ZooMeta {
        seed,
        folds: a.folds,
        models: specs.iter().map(|s| s.name.clone()).collect(),
        proposed,
        test: a.test.into(),
    };
    write_atomic(&a.out_dir.join("fold_reports.csv"), |w| Ok(write_fold_reports(w, &meta, &run.reports)?))?;
    write_summaries(&a.out_dir, &meta, &run.report)?;
    for h in &run.histories {
        write_atomic(&history_dir.join(format!("{}_{}.csv", h.model, h.fold)), |w| {
            seed_line(w, seed)?;
            h.history.write_csv(w)?;
            Ok(())
        })?;
    }
    print_report(&run.report);
    for f in &run.failures {
        eprintln!("{} fold {} failed: {}", f.model, f.fold, f.error);
    }
    if !run.failures.is_empty() {
        bail!("{} of {} cells failed; partial results were written", run.failures.len(), specs.len() * a.folds);
    }
    Ok(())
}

fn featsel(a: &FeatselArgs, seed: u64) -> Result<()> {
    check_folds(a.folds)?;
    let config = a.train.config(seed);
    config.validate()?;
    let data = load_features(&a.data)?;
    let spec = resolve_model(&a.model, data.features(), a.train.sizes.zoo_sizes())?;
    ensure_dir(&a.out_dir)?;
    let plan = kfold_split(data.rows(), a.folds, seed)?;
    let study = feature_elimination_study(&data, &spec, &config, &plan)?;
    write_atomic(&a.out_dir.join("featsel.csv"), |w| Ok(study.write_csv(w, seed)?))?;
    println!(
        "{} cross-validated runs; baseline mean R {:.3}, RMSE {:.3}",
        study.runs, study.baseline.mean_r, study.baseline.mean_rmse
    );
    println!("removal candidates (largest R gain first):");
    for r in study.removals.iter().take(5) {
        println!("  {:<40} delta R {:+.4}", r.feature.as_deref().unwrap_or(""), r.delta_r);
    }
    Ok(())
}

fn hpo(a: &HpoArgs, seed: u64) -> Result<()> {
    if a.cv {
        check_folds(a.folds)?;
    }
    let base = a.train.config(seed);
    base.validate()?;
    let data = load_features(&a.data)?;
    let spec = resolve_model(&a.model, data.features(), a.train.sizes.zoo_sizes())?;
    ensure_dir(&a.out_dir)?;
    let plan = if a.cv {
        HpoPlan::CrossValidation(kfold_split(data.rows(), a.folds, seed)?)
    } else {
        HpoPlan::Holdout(holdout_split(data.rows(), seed)?)
    };
    let result = grid_search_hpo(&data, &spec, &base, &a.lrs, &a.batches, &plan)?;
    write_atomic(&a.out_dir.join("hpo_grid.csv"), |w| Ok(result.grid.write_csv(w, seed)?))?;
    let best = result.best.map(|(i, j)| {
        serde_json::json!({
            "learning_rate": result.grid.learning_rates[i],
            "batch_size": result.grid.batch_sizes[j],
            "rmse": result.grid.rmse[i][j],
        })
    });
    write_json(&a.out_dir.join("hpo_best.json"), seed, "best", &best)?;
    println!("{} cells, {} failed", result.grid.cells(), result.grid.failures.len());
    match result.best {
        Some((i, j)) => println!(
            "best: learning rate {:e}, batch size {}, test RMSE {:.3}",
            result.grid.learning_rates[i], result.grid.batch_sizes[j], result.grid.rmse[i][j]
        ),
        None => bail!("every grid cell failed"),
    }
    Ok(())
}

fn depth(a: &DepthArgs, seed: u64) -> Result<()> {
    let config = a.train.config(seed);
    config.validate()?;
    let data = load_features(&a.data)?;
    let spec = resolve_model(&a.model, data.features(), a.train.sizes.zoo_sizes())?;
    ensure_dir(&a.out_dir)?;
    let search = greedy_layer_search(&data, &spec, &config, a.max_depth, a.tolerance)?;
    write_atomic(&a.out_dir.join("depth_trace.csv"), |w| {
        seed_line(w, seed)?;
        writeln!(w, "depth,val_rmse")?;
        for (i, v) in search.trace.iter().enumerate() {
            writeln!(w, "{},{v:.6}", i + 1)?;
        }
        Ok(())
    })?;
    println!("chosen depth: {} (validation RMSE {:.6})", search.depth, search.trace[search.depth - 1]);
    Ok(())
}

fn report(a: &ReportArgs) -> Result<()> {
    let file = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let (meta, reports) = read_fold_reports(BufReader::new(file)).with_context(|| format!("reading {}", a.input.display()))?;
    ensure_dir(&a.out_dir)?;
    let report = build_zoo_report(&meta.models, meta.folds, &reports, meta.proposed.as_deref(), meta.test);
    write_summaries(&a.out_dir, &meta, &report)?;
    print_report(&report);
    Ok(())
}
