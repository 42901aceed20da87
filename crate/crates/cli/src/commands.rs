use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use spinrbm::checkpoint::{write_atomic, Checkpoint};
use spinrbm::data::{self, idx, Dataset, MnistFiles};
use spinrbm::metrics::{
    energy_coefficient, gibbs_snapshots, metrics_csv, recon_error, reconstruct, MetricsRecord,
    RECON_ERROR_DEFINITION,
};
use spinrbm::rng::mix64;
use spinrbm::training::{train_with, AdamState, TrainConfig};
use spinrbm::StreamRng;

use crate::args::{
    required, resolve_train_config, EvalArgs, FileConfig, ReconstructArgs, SampleArgs, TrainArgs,
    WeightsArgs,
};
use crate::grid::{rescaled_tile, spin_tile, TileGrid};

pub const CHECKPOINT_FILE: &str = "checkpoint.rbm";
pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const DEFAULT_SAMPLE_STEPS: &[usize] = &[0, 1, 2, 4, 8, 16, 32];
pub const DEFAULT_EVAL_STEPS: &[usize] = &[0, 2, 4, 8, 16, 32];
pub const DEFAULT_CHAINS: usize = 16;
pub const DEFAULT_RECONSTRUCTIONS: usize = 16;
pub const DEFAULT_WEIGHT_TILES: usize = 64;
pub const DEFAULT_EVAL_BATCH: usize = 1024;

/// Fraction of training images held out when no test files are present.
const HOLDOUT_FRACTION: f64 = 0.1;

/// Training images (optionally truncated) and a held-out set.
pub struct Splits {
    pub files: MnistFiles,
    pub train: Dataset,
    pub holdout: Dataset,
}

/// Loads MNIST from `dir`. The held-out set is the t10k file when present,
/// otherwise the last 10% of the training file.
pub fn load_splits(dir: &Path, threshold: f64, max_train: Option<usize>) -> Result<Splits> {
    let files = MnistFiles::locate(dir)?;
    let mut train_raw = idx::load_images(&files.train_images)?;
    let holdout_raw = match &files.test_images {
        Some(path) => idx::load_images(path)?,
        None => {
            ensure!(train_raw.count >= 2, "need at least two training images");
            let keep = train_raw.count
                - ((train_raw.count as f64 * HOLDOUT_FRACTION).ceil() as usize).max(1);
            let n = train_raw.pixels_per_image();
            let tail = data::RawImages {
                count: train_raw.count - keep,
                rows: train_raw.rows,
                cols: train_raw.cols,
                pixels: train_raw.pixels[keep * n..].to_vec(),
            };
            train_raw.truncate(keep);
            tail
        }
    };
    ensure!(
        holdout_raw.pixels_per_image() == train_raw.pixels_per_image(),
        "held-out images are {}x{}, training images {}x{}",
        holdout_raw.rows,
        holdout_raw.cols,
        train_raw.rows,
        train_raw.cols
    );
    if let Some(n) = max_train {
        train_raw.truncate(n);
    }
    ensure!(train_raw.count >= 2, "need at least two training images");
    ensure!(holdout_raw.count >= 1, "held-out set is empty");
    Ok(Splits {
        files,
        train: data::binarize(&train_raw, threshold),
        holdout: data::binarize(&holdout_raw, threshold),
    })
}

fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub config: TrainConfig,
    pub data: MnistFiles,
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
    pub image_dir: PathBuf,
    pub seed: u64,
    pub train_samples: usize,
    pub holdout_samples: usize,
    pub recon_error_definition: &'static str,
}

#[derive(Debug)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub metrics_csv: PathBuf,
    pub metrics: Vec<MetricsRecord>,
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainSummary> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let config = resolve_train_config(args, &file)?;
    let data_dir = required(args.data.clone(), file.data.clone(), "data")?;
    let out_dir = required(args.out.clone(), file.out.clone(), "out")?;
    let wall_time = args.wall_time || file.wall_time == Some(true);

    let splits = load_splits(
        &data_dir,
        config.binarize_threshold,
        config.max_train_samples,
    )
    .with_context(|| format!("loading data from {}", data_dir.display()))?;
    let stats = data::compute_stats(&splits.train.spins, 0.0)?;

    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let out_dir = absolute(&out_dir);
    let checkpoint_path = out_dir.join(CHECKPOINT_FILE);
    let metrics_path = out_dir.join(METRICS_FILE);
    let manifest = RunManifest {
        command: "train",
        config: config.clone(),
        data: MnistFiles {
            train_images: absolute(&splits.files.train_images),
            train_labels: splits.files.train_labels.as_deref().map(absolute),
            test_images: splits.files.test_images.as_deref().map(absolute),
            test_labels: splits.files.test_labels.as_deref().map(absolute),
        },
        checkpoint: checkpoint_path.clone(),
        metrics: metrics_path.clone(),
        image_dir: out_dir.clone(),
        seed: config.seed,
        train_samples: splits.train.len(),
        holdout_samples: splits.holdout.len(),
        recon_error_definition: RECON_ERROR_DEFINITION,
    };
    write_atomic(
        &out_dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    eprintln!(
        "training {} hidden units on {} images ({} held out), rank(Σ) = {}",
        config.n_hidden,
        splits.train.len(),
        splits.holdout.len(),
        stats.rank()
    );

    let save = |model: &spinrbm::RbmModel, adam: &AdamState| -> spinrbm::Result<()> {
        Checkpoint {
            model: model.clone(),
            stats: stats.clone(),
            adam: adam.clone(),
            config: config.clone(),
        }
        .save(&checkpoint_path)
    };

    let mut history = Vec::new();
    let outcome = train_with(
        &splits.train.spins,
        &stats,
        &config,
        Some(&splits.holdout.spins),
        |record, model, adam| {
            eprintln!(
                "epoch {:>4}  energy_coefficient {:.4}  recon_error {:.4}  ({} ms)",
                record.epoch, record.energy_coefficient, record.recon_error, record.wall_ms
            );
            history.push(record.clone());
            save(model, adam)?;
            write_atomic(&metrics_path, metrics_csv(&history, wall_time).as_bytes())
        },
    )?;
    save(&outcome.model, &outcome.adam)?;
    write_atomic(
        &metrics_path,
        metrics_csv(&outcome.metrics, wall_time).as_bytes(),
    )?;
    Ok(TrainSummary {
        checkpoint: checkpoint_path,
        metrics_csv: metrics_path,
        metrics: outcome.metrics,
    })
}

fn load_checkpoint(flag: &Option<PathBuf>, file: &FileConfig) -> Result<Checkpoint> {
    let path = required(flag.clone(), file.checkpoint.clone(), "checkpoint")?;
    Checkpoint::load(&path).with_context(|| format!("loading checkpoint {}", path.display()))
}

/// Side length of a square image with `n` pixels.
fn image_side(n: usize) -> Result<usize> {
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        bail!("{n} visible units do not form a square image");
    }
    Ok(side)
}

fn sorted_steps(steps: Option<Vec<usize>>, default: &[usize]) -> Result<Vec<usize>> {
    let steps = steps.unwrap_or_else(|| default.to_vec());
    ensure!(
        !steps.is_empty(),
        "--steps must list at least one step count"
    );
    ensure!(
        steps.windows(2).all(|w| w[0] <= w[1]),
        "--steps must be ascending, got {steps:?}"
    );
    Ok(steps)
}

#[derive(Debug)]
pub struct GridSummary {
    pub path: PathBuf,
    pub rows: usize,
    pub cols: usize,
}

pub fn cmd_sample(args: &SampleArgs) -> Result<GridSummary> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let ck = load_checkpoint(&args.checkpoint, &file)?;
    let out = required(args.out.clone(), file.out.clone(), "out")?;
    let steps = sorted_steps(
        args.steps.clone().or(file.steps.clone()),
        DEFAULT_SAMPLE_STEPS,
    )?;
    let chains = args.chains.or(file.chains).unwrap_or(DEFAULT_CHAINS);
    ensure!(chains >= 1, "--chains must be at least 1");
    let seed = args.common.seed.or(file.seed).unwrap_or(0);
    let side = image_side(ck.model.n_visible())?;

    let mut rng = StreamRng::new(seed);
    let snapshots = gibbs_snapshots(&ck.model, &ck.stats, chains, &steps, &mut rng)?;
    let mut grid = TileGrid::new(steps.len(), chains, side, side);
    for (_, batch) in &snapshots {
        for row in batch.view().rows() {
            grid.push(spin_tile(row.iter().copied()))?;
        }
    }
    write_atomic(&out, &grid.to_pgm())?;
    Ok(GridSummary {
        path: out,
        rows: steps.len(),
        cols: chains,
    })
}

#[derive(Debug)]
pub struct ReconstructSummary {
    pub grid: GridSummary,
    /// Fraction of pixels where the thresholded reconstruction differs.
    pub disagreement: f64,
}

pub fn cmd_reconstruct(args: &ReconstructArgs) -> Result<ReconstructSummary> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let ck = load_checkpoint(&args.checkpoint, &file)?;
    let data_dir = required(args.data.clone(), file.data.clone(), "data")?;
    let out = required(args.out.clone(), file.out.clone(), "out")?;
    let threshold = args
        .threshold
        .or(file.threshold)
        .unwrap_or(ck.config.binarize_threshold);
    let count = args.count.or(file.count).unwrap_or(DEFAULT_RECONSTRUCTIONS);
    ensure!(count >= 1, "--count must be at least 1");
    let seed = args.common.seed.or(file.seed).unwrap_or(0);

    let splits = load_splits(&data_dir, threshold, None)?;
    ensure!(
        splits.holdout.n_visible() == ck.model.n_visible(),
        "data has {} pixels, model expects {}",
        splits.holdout.n_visible(),
        ck.model.n_visible()
    );
    let originals = splits.holdout.spins.head(count);
    let count = originals.len();
    let readback = reconstruct(&ck.model, &originals, &mut StreamRng::new(seed))?;
    let (rows, cols) = splits.holdout.image_shape;

    let mut grid = TileGrid::new(2, count, rows, cols);
    for row in originals.view().rows() {
        grid.push(spin_tile(row.iter().copied()))?;
    }
    let mut differ = 0usize;
    for (orig, rec) in originals.view().rows().into_iter().zip(readback.rows()) {
        let spins: Vec<i8> = rec.iter().map(|&x| if x > 0.0 { 1 } else { -1 }).collect();
        differ += orig.iter().zip(&spins).filter(|(a, b)| a != b).count();
        grid.push(spin_tile(spins))?;
    }
    write_atomic(&out, &grid.to_pgm())?;
    Ok(ReconstructSummary {
        grid: GridSummary {
            path: out,
            rows: 2,
            cols: count,
        },
        disagreement: differ as f64 / (count * ck.model.n_visible()) as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub step: usize,
    pub recon_error: f64,
    pub energy_coefficient: f64,
}

pub const EVAL_CSV_HEADER: &str = "step,recon_error,energy_coefficient";

pub fn eval_csv(rows: &[EvalRow]) -> String {
    let mut out = format!("{EVAL_CSV_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6}\n",
            r.step, r.recon_error, r.energy_coefficient
        ));
    }
    out
}

/// Reconstruction error and energy coefficient of belief-generated samples
/// after each requested number of Gibbs sweeps.
pub fn evaluate_steps(
    ck: &Checkpoint,
    reference: &spinrbm::SpinBatch,
    batch_size: usize,
    steps: &[usize],
    seed: u64,
) -> Result<Vec<EvalRow>> {
    let mut rng = StreamRng::new(seed);
    let snapshots = gibbs_snapshots(&ck.model, &ck.stats, batch_size, steps, &mut rng)?;
    let mut eval_rng = StreamRng::new(mix64(seed ^ 0xe7a1));
    snapshots
        .iter()
        .map(|(step, batch)| {
            Ok(EvalRow {
                step: *step,
                recon_error: recon_error(&ck.model, batch, &mut eval_rng)?,
                energy_coefficient: energy_coefficient(reference, batch)?,
            })
        })
        .collect()
}

pub fn cmd_eval(args: &EvalArgs) -> Result<Vec<EvalRow>> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let ck = load_checkpoint(&args.checkpoint, &file)?;
    let data_dir = required(args.data.clone(), file.data.clone(), "data")?;
    let out = required(args.out.clone(), file.out.clone(), "out")?;
    let steps = sorted_steps(
        args.steps.clone().or(file.steps.clone()),
        DEFAULT_EVAL_STEPS,
    )?;
    let batch_size = args
        .batch_size
        .or(file.batch_size)
        .unwrap_or(DEFAULT_EVAL_BATCH);
    ensure!(batch_size >= 1, "--batch-size must be at least 1");
    let threshold = args
        .threshold
        .or(file.threshold)
        .unwrap_or(ck.config.binarize_threshold);
    let seed = args.common.seed.or(file.seed).unwrap_or(0);

    let splits = load_splits(&data_dir, threshold, None)?;
    ensure!(
        splits.holdout.n_visible() == ck.model.n_visible(),
        "data has {} pixels, model expects {}",
        splits.holdout.n_visible(),
        ck.model.n_visible()
    );
    let reference = splits.holdout.spins.head(batch_size);
    let rows = evaluate_steps(&ck, &reference, batch_size, &steps, seed)?;
    println!(
        "{:>6}  {:>11}  {:>18}",
        "step", "recon_error", "energy_coefficient"
    );
    for r in &rows {
        println!(
            "{:>6}  {:>11.4}  {:>18.4}",
            r.step, r.recon_error, r.energy_coefficient
        );
    }
    write_atomic(&out, eval_csv(&rows).as_bytes())?;
    Ok(rows)
}

pub fn cmd_weights(args: &WeightsArgs) -> Result<GridSummary> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let ck = load_checkpoint(&args.checkpoint, &file)?;
    let out = required(args.out.clone(), file.out.clone(), "out")?;
    let tiles = args.tiles.or(file.tiles).unwrap_or(DEFAULT_WEIGHT_TILES);
    ensure!(tiles >= 1, "--tiles must be at least 1");
    let seed = args.common.seed.or(file.seed).unwrap_or(0);
    let side = image_side(ck.model.n_visible())?;

    let n_h = ck.model.n_hidden();
    let k = tiles.min(n_h);
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed));
    let chosen = rand::seq::index::sample(&mut rng, n_h, k).into_vec();
    let cols = (k as f64).sqrt().ceil() as usize;
    let rows = k.div_ceil(cols);
    let mut grid = TileGrid::new(rows, cols, side, side);
    for j in chosen {
        grid.push(rescaled_tile(ck.model.weights.column(j).iter().copied()))?;
    }
    write_atomic(&out, &grid.to_pgm())?;
    Ok(GridSummary {
        path: out,
        rows,
        cols,
    })
}
