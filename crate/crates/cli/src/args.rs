//! Command-line flags and their JSON config-file equivalents.
//!
//! Every flag may also be given in the file passed to `--config`, using the
//! flag name with underscores (`batch_size`, `eval_every`, ...). Flags given on
//! the command line win.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use spinrbm::training::{MetricSplit, NegativeMode, TrainConfig};

#[derive(Debug, Parser)]
#[command(
    name = "rbm",
    version,
    about = "Spin RBMs trained with belief-generation CD-0"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on MNIST IDX files
    Train(TrainArgs),
    /// Sample-evolution grid: one row per Gibbs step count
    Sample(SampleArgs),
    /// Originals above their one-step reconstructions
    Reconstruct(ReconstructArgs),
    /// Reconstruction error and energy coefficient versus Gibbs steps
    Eval(EvalArgs),
    /// Tile a random subset of the learned weight vectors
    Weights(WeightsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Paper,
    Desk,
}

impl Preset {
    pub fn config(self) -> TrainConfig {
        match self {
            Preset::Paper => TrainConfig::paper(),
            Preset::Desk => TrainConfig::desk(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativeArg {
    /// Belief generation, no Gibbs refinement
    BeliefCd0,
    /// k Gibbs sweeps started from the data batch
    CdK,
}

#[derive(Debug, Clone, Args, Default)]
pub struct CommonArgs {
    /// JSON file with defaults for any flag
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Directory holding train-images-idx3-ubyte[.gz] (and optionally t10k files)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory for checkpoint, metrics and manifest
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Pixels above this fraction of 255 become +1
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub init_std: Option<f64>,
    #[arg(long, value_enum)]
    pub negative: Option<NegativeArg>,
    /// Gibbs sweeps for `--negative cd-k`
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Train on the first N images only
    #[arg(long)]
    pub max_train: Option<usize>,
    /// Compute logged metrics on the training set instead of held-out data
    #[arg(long)]
    pub metrics_on_train: bool,
    /// Fill the wall_ms column of metrics.csv (makes the log run-dependent)
    #[arg(long)]
    pub wall_time: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Output PGM file
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated Gibbs step counts, one grid row each
    #[arg(long, value_delimiter = ',')]
    pub steps: Option<Vec<usize>>,
    /// Independent chains (grid columns)
    #[arg(long)]
    pub chains: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Number of held-out digits
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output CSV file
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub steps: Option<Vec<usize>>,
    /// Generated and reference samples per evaluation
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct WeightsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub tiles: Option<usize>,
}

/// Contents of a `--config` file. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub seed: Option<u64>,
    pub preset: Option<Preset>,
    pub steps: Option<Vec<usize>>,
    pub batch_size: Option<usize>,
    pub threshold: Option<f64>,
    pub epochs: Option<usize>,
    pub hidden: Option<usize>,
    pub lr: Option<f64>,
    pub init_std: Option<f64>,
    pub negative: Option<NegativeArg>,
    pub k: Option<usize>,
    pub eval_every: Option<usize>,
    pub max_train: Option<usize>,
    pub metrics_on_train: Option<bool>,
    pub wall_time: Option<bool>,
    pub chains: Option<usize>,
    pub count: Option<usize>,
    pub tiles: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

pub fn required(flag: Option<PathBuf>, file: Option<PathBuf>, name: &str) -> Result<PathBuf> {
    match flag.or(file) {
        Some(p) => Ok(p),
        None => bail!("--{name} is required (on the command line or in --config)"),
    }
}

/// Training configuration: preset, then config file, then flags.
pub fn resolve_train_config(args: &TrainArgs, file: &FileConfig) -> Result<TrainConfig> {
    let preset = args.preset.or(file.preset).unwrap_or(Preset::Paper);
    let mut cfg = preset.config();
    macro_rules! apply {
        ($field:ident, $flag:ident) => {
            if let Some(v) = args.$flag.clone().or(file.$flag.clone()) {
                cfg.$field = v;
            }
        };
    }
    apply!(batch_size, batch_size);
    apply!(binarize_threshold, threshold);
    apply!(epochs, epochs);
    apply!(n_hidden, hidden);
    apply!(learning_rate, lr);
    apply!(init_std, init_std);
    apply!(k, k);
    apply!(eval_every, eval_every);
    if let Some(seed) = args.common.seed.or(file.seed) {
        cfg.seed = seed;
    }
    if let Some(n) = args.max_train.or(file.max_train) {
        cfg.max_train_samples = Some(n);
    }
    if let Some(neg) = args.negative.or(file.negative) {
        cfg.negative_mode = match neg {
            NegativeArg::BeliefCd0 => NegativeMode::BeliefCd0,
            NegativeArg::CdK => NegativeMode::CdKFromData,
        };
    }
    if args.metrics_on_train || file.metrics_on_train == Some(true) {
        cfg.metric_split = MetricSplit::Train;
    }
    cfg.validate()?;
    Ok(cfg)
}
