use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::parser::ValueSource;
use clap::{ArgMatches, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use losnet_core::eval::TestKind;
use losnet_core::nn::ZooSizes;
use losnet_core::studies::DEPTH_TOLERANCE;
use losnet_core::train::TrainConfig;

#[derive(Debug, Parser, Serialize, Deserialize)]
#[command(name = "losnet", version, about = "Length-of-stay regression experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct GlobalArgs {
    /// JSON document of flag values (snake_case keys); command-line flags win
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads; 0 uses every core
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Log progress
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand, Serialize, Deserialize)]
pub enum Command {
    /// Write a synthetic admissions CSV
    Generate(GenerateArgs),
    /// Impute, encode and scale a dataset; write it with the fitted plan
    Wrangle(WrangleArgs),
    /// Cross-validate one model, a spec file, or the whole zoo (`all`)
    Cv(CvArgs),
    /// Leave-one-feature-out elimination study
    Featsel(FeatselArgs),
    /// Learning-rate by batch-size grid search
    Hpo(HpoArgs),
    /// Greedy recurrent stack depth search
    Depth(DepthArgs),
    /// Rebuild summaries from a persisted fold_reports.csv
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    /// Number of rows
    #[arg(long, default_value_t = 20_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub rows: u64,
    /// Output CSV
    #[arg(long, default_value = "synthetic.csv")]
    pub out: PathBuf,
    /// Per-cell probability of a blank nullable cell
    #[arg(long, default_value_t = 0.01)]
    pub missing_rate: f64,
    /// Also emit an Admission Date column
    #[arg(long)]
    pub include_date: bool,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct DataArgs {
    /// Input admissions CSV
    #[arg(long, default_value = "synthetic.csv")]
    pub data: PathBuf,
    /// Neighbours used for imputation
    #[arg(long, default_value_t = 5)]
    pub knn: usize,
    /// One-hot instead of label encoding
    #[arg(long)]
    pub one_hot: bool,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct WrangleArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Scaled output CSV
    #[arg(long, default_value = "wrangled.csv")]
    pub out: PathBuf,
    /// Fitted plan (JSON)
    #[arg(long, default_value = "wrangle_plan.json")]
    pub plan_out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sizes {
    /// 32/64 filters, 64 hidden units, 64/32 dense units
    Full,
    /// 8/16 filters, 16 hidden units, 32/16 dense units
    Compact,
}

impl Sizes {
    pub fn zoo_sizes(self) -> ZooSizes {
        match self {
            Sizes::Full => ZooSizes::default(),
            Sizes::Compact => ZooSizes::compact(),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Test {
    Welch,
    Paired,
}

impl From<Test> for TestKind {
    fn from(t: Test) -> Self {
        match t {
            Test::Welch => TestKind::Welch,
            Test::Paired => TestKind::Paired,
        }
    }
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Maximum epochs per training run
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 512)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Epochs without validation improvement before stopping
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    /// Fraction of training rows held out for early stopping
    #[arg(long, default_value_t = 0.1)]
    pub validation_fraction: f64,
    /// Layer widths of the built-in models
    #[arg(long, value_enum, default_value_t = Sizes::Full)]
    pub sizes: Sizes,
}

impl TrainArgs {
    pub fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            batch_size: self.batch_size,
            max_epochs: self.epochs,
            patience: self.patience,
            validation_fraction: self.validation_fraction,
            seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Zoo model name, path to a JSON model spec, or `all`
    #[arg(long, default_value = "cnn-gru-dnn")]
    pub model: String,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Significance test against the proposed model
    #[arg(long, value_enum, default_value_t = Test::Welch)]
    pub test: Test,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct FeatselArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Zoo model name or path to a JSON model spec
    #[arg(long, default_value = "cnn-gru-dnn")]
    pub model: String,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct HpoArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value = "cnn-gru-dnn")]
    pub model: String,
    /// Learning rates (grid rows)
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.001,0.0001,0.00001")]
    pub lrs: Vec<f64>,
    /// Batch sizes (grid columns)
    #[arg(long, value_delimiter = ',', default_value = "128,256,512,1024,2048,4096,8192")]
    pub batches: Vec<usize>,
    /// Score every cell by k-fold cross-validation instead of one 80/10/10 split
    #[arg(long)]
    pub cv: bool,
    /// Folds when --cv is set
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct DepthArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value = "cnn-gru-dnn")]
    pub model: String,
    /// Deepest recurrent stack to try
    #[arg(long = "max", default_value_t = 4)]
    pub max_depth: usize,
    /// Minimum validation RMSE gain (scaled units) per extra layer
    #[arg(long, default_value_t = DEPTH_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct ReportArgs {
    /// Persisted fold reports
    #[arg(long, default_value = "out/fold_reports.csv")]
    pub input: PathBuf,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

/// Overlays values from `--config` on every argument not given on the
/// command line.
pub fn apply_config(cli: Cli, matches: &ArgMatches) -> anyhow::Result<Cli> {
    let Some(path) = cli.global.config.clone() else {
        return Ok(cli);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let Value::Object(file) = serde_json::from_str::<Value>(&text).with_context(|| format!("parsing config {}", path.display()))? else {
        bail!("config {} must be a JSON object", path.display());
    };
    let file: Map<String, Value> = file.into_iter().map(|(k, v)| (k.replace('-', "_"), v)).collect();
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let mut value = serde_json::to_value(&cli)?;
    overlay(&mut value["global"], &file, matches);
    let variant = value["command"].as_object_mut().and_then(|o| o.values_mut().next()).expect("externally tagged command");
    overlay(variant, &file, sub);
    serde_json::from_value(value).with_context(|| format!("config {} has a value of the wrong type for `{name}`", path.display()))
}

fn overlay(target: &mut Value, file: &Map<String, Value>, matches: &ArgMatches) {
    let Value::Object(fields) = target else { return };
    for (key, slot) in fields.iter_mut() {
        if slot.is_object() {
            overlay(slot, file, matches);
            continue;
        }
        let from_cli = matches!(matches.try_get_raw(key), Ok(Some(_))) && matches.value_source(key) == Some(ValueSource::CommandLine);
        if let (false, Some(v)) = (from_cli, file.get(key)) {
            *slot = v.clone();
        }
    }
}
