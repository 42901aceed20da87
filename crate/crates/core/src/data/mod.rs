//! Dataset ingestion, binarization, statistics and minibatching.

pub mod idx;

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RbmError, Result};
use crate::rng::mix64;
use crate::spin::SpinBatch;

pub use idx::RawImages;

/// Eigenvalues below this are treated as zero and their directions dropped.
pub const RANK_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Binarized images, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spins: SpinBatch,
    /// Image geometry `(rows, cols)`, kept for visualisation.
    pub image_shape: (usize, usize),
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn n_visible(&self) -> usize {
        self.spins.width()
    }
}

/// Pixel `p` maps to +1 iff `p / 255 > threshold`.
pub fn binarize(images: &RawImages, threshold: f64) -> Dataset {
    let n = images.pixels_per_image();
    let data = Array2::from_shape_fn((images.count, n), |(i, j)| {
        if f64::from(images.pixels[i * n + j]) / 255.0 > threshold {
            1i8
        } else {
            -1i8
        }
    });
    Dataset {
        spins: SpinBatch::from_trusted(data),
        image_shape: (images.rows, images.cols),
    }
}

/// Empirical mean and a square-root factor of the empirical covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataStats {
    pub mean: Array1<f64>,
    /// `n_visible x rank`, with `Q Qᵀ = Σ` on the retained eigenspace.
    pub sqrt_cov: Array2<f64>,
}

impl DataStats {
    pub fn n_visible(&self) -> usize {
        self.mean.len()
    }

    pub fn rank(&self) -> usize {
        self.sqrt_cov.ncols()
    }

    pub fn covariance(&self) -> Array2<f64> {
        self.sqrt_cov.dot(&self.sqrt_cov.t())
    }
}

/// Population covariance `(1/N) Σ (v - mu)(v - mu)ᵀ`.
pub fn empirical_covariance(spins: &SpinBatch) -> (Array1<f64>, Array2<f64>) {
    let mean = spins.column_mean();
    let centered = spins.to_f64() - &mean;
    let cov = centered.t().dot(&centered) / spins.len() as f64;
    (mean, cov)
}

/// Mean and covariance square root via a symmetric eigendecomposition.
///
/// Eigenvalues are clamped below at `eig_floor`; directions whose (clamped)
/// eigenvalue is under [`RANK_TOLERANCE`] are dropped. Columns are ordered by
/// decreasing eigenvalue.
pub fn compute_stats(spins: &SpinBatch, eig_floor: f64) -> Result<DataStats> {
    if spins.len() < 2 {
        return Err(RbmError::Config(format!(
            "statistics need at least 2 samples, got {}",
            spins.len()
        )));
    }
    if !eig_floor.is_finite() || eig_floor < 0.0 {
        return Err(RbmError::Config(format!(
            "invalid eigenvalue floor {eig_floor}"
        )));
    }
    let (mean, cov) = empirical_covariance(spins);
    if !cov.iter().all(|x| x.is_finite()) {
        return Err(RbmError::NonFinite("covariance"));
    }
    let n = cov.nrows();
    let eig = SymmetricEigen::new(DMatrix::from_fn(n, n, |i, j| cov[(i, j)]));

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let kept: Vec<(usize, f64)> = order
        .into_iter()
        .map(|k| (k, eig.eigenvalues[k].max(eig_floor)))
        .filter(|&(_, lambda)| lambda >= RANK_TOLERANCE)
        .collect();

    let mut sqrt_cov = Array2::zeros((n, kept.len()));
    for (col, &(k, lambda)) in kept.iter().enumerate() {
        let scale = lambda.sqrt();
        for row in 0..n {
            sqrt_cov[(row, col)] = eig.eigenvectors[(row, k)] * scale;
        }
    }
    Ok(DataStats { mean, sqrt_cov })
}

/// Row indices of each minibatch for one epoch: a fresh permutation determined
/// by `(seed, epoch)`, cut into chunks of `batch_size` (the last may be short).
pub fn minibatch_indices(
    n: usize,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(RbmError::Config("batch size must be at least 1".into()));
    }
    if batch_size > n {
        return Err(RbmError::Config(format!(
            "batch size {batch_size} exceeds dataset size {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed) ^ mix64(epoch.wrapping_add(0x5eed)));
    perm.shuffle(&mut rng);
    Ok(perm.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

pub fn minibatches(
    spins: &SpinBatch,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<Vec<SpinBatch>> {
    Ok(minibatch_indices(spins.len(), batch_size, seed, epoch)?
        .iter()
        .map(|idx| spins.select(idx))
        .collect())
}

/// Standard MNIST file names inside a directory; `.gz` variants are accepted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MnistFiles {
    pub train_images: PathBuf,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
}

fn find_file(dir: &Path, stem: &str) -> Option<PathBuf> {
    [stem.to_string(), format!("{stem}.gz")]
        .into_iter()
        .map(|name| dir.join(name))
        .find(|p| p.is_file())
}

impl MnistFiles {
    pub fn locate(dir: &Path) -> Result<Self> {
        let train_images = find_file(dir, "train-images-idx3-ubyte").ok_or_else(|| {
            RbmError::io(
                dir.join("train-images-idx3-ubyte"),
                std::io::Error::new(std::io::ErrorKind::NotFound, "training images not found"),
            )
        })?;
        Ok(MnistFiles {
            train_images,
            train_labels: find_file(dir, "train-labels-idx1-ubyte"),
            test_images: find_file(dir, "t10k-images-idx3-ubyte"),
            test_labels: find_file(dir, "t10k-labels-idx1-ubyte"),
        })
    }
}
