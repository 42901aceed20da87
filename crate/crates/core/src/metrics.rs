//! Energy coefficient and reconstruction error.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::DataStats;
use crate::error::{check_dim, RbmError, Result};
use crate::rbm::RbmModel;
use crate::rng::StreamRng;
use crate::sampling::{belief_generate, gibbs_steps, sample_hidden};
use crate::spin::SpinBatch;

/// Header of the per-epoch metrics log.
pub const METRICS_CSV_HEADER: &str = "epoch,energy_coefficient,recon_error,wall_ms";

/// One-line statement of the reconstruction error definition.
pub const RECON_ERROR_DEFINITION: &str =
    "recon_error = sum|v - tanh(b + W h)| / (2 B n_v), h ~ p(h|v) sampled once per row";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub energy_coefficient: f64,
    pub recon_error: f64,
    pub wall_ms: u64,
}

/// Histogram of Hamming distances between all ordered pairs `(x_i, y_j)`.
fn hamming_histogram(x: &SpinBatch, y: &SpinBatch) -> Vec<u64> {
    let n = x.width();
    let dots: Array2<f64> = x.to_f64().dot(&y.to_f64().t());
    let mut hist = vec![0u64; n + 1];
    for &d in dots.iter() {
        // v·v' = n - 2 * hamming, exact in f64 for spin vectors
        let k = ((n as f64 - d) / 2.0).round() as usize;
        hist[k] += 1;
    }
    hist
}

/// Mean Euclidean distance over all ordered pairs. For spins,
/// `||v - v'|| = 2 sqrt(hamming)`; accumulating by distance class makes the
/// result independent of pair order.
fn mean_pair_distance(x: &SpinBatch, y: &SpinBatch) -> f64 {
    let hist = hamming_histogram(x, y);
    let total: f64 = hist
        .iter()
        .enumerate()
        .map(|(k, &c)| c as f64 * 2.0 * (k as f64).sqrt())
        .sum();
    total / (x.len() as f64 * y.len() as f64)
}

/// Normalized energy distance `(2 d_xy - d_xx - d_yy) / (2 d_xy)`.
///
/// All three means run over every ordered pair, the within-batch ones
/// including the zero-distance `i = j` terms. Returns 0 when `d_xy = 0`.
pub fn energy_coefficient(x: &SpinBatch, y: &SpinBatch) -> Result<f64> {
    x.require_nonempty("energy_coefficient x")?;
    y.require_nonempty("energy_coefficient y")?;
    check_dim("energy_coefficient", x.width(), y.width())?;
    let d_xy = mean_pair_distance(x, y);
    if d_xy == 0.0 {
        return Ok(0.0);
    }
    let d_xx = mean_pair_distance(x, x);
    let d_yy = mean_pair_distance(y, y);
    // summing the within terms first keeps the result exactly symmetric
    Ok((2.0 * d_xy - (d_xx + d_yy)) / (2.0 * d_xy))
}

/// One-step reconstruction error, in `[0, 1]`. See [`RECON_ERROR_DEFINITION`].
pub fn recon_error(model: &RbmModel, batch: &SpinBatch, rng: &mut StreamRng) -> Result<f64> {
    batch.require_nonempty("recon_error")?;
    let readback = reconstruct(model, batch, rng)?;
    let total: f64 = batch
        .view()
        .iter()
        .zip(readback.iter())
        .map(|(&v, &r)| (f64::from(v) - r).abs())
        .sum();
    Ok(total / (2.0 * batch.len() as f64 * batch.width() as f64))
}

/// Mean-field readback `tanh(b + W h)` after sampling `h ~ p(h | v)`.
pub fn reconstruct(
    model: &RbmModel,
    batch: &SpinBatch,
    rng: &mut StreamRng,
) -> Result<Array2<f64>> {
    let h = sample_hidden(model, batch, rng)?;
    Ok(model.visible_fields(&h)?.mapv(f64::tanh))
}

/// Belief-generated batch advanced through Gibbs sweeps, snapshotted after
/// each requested total sweep count. `steps` must be non-decreasing.
pub fn gibbs_snapshots(
    model: &RbmModel,
    stats: &DataStats,
    batch_size: usize,
    steps: &[usize],
    rng: &mut StreamRng,
) -> Result<Vec<(usize, SpinBatch)>> {
    if steps.windows(2).any(|w| w[0] > w[1]) {
        return Err(RbmError::Config(format!(
            "steps must be sorted ascending: {steps:?}"
        )));
    }
    let mut current = belief_generate(model, stats, batch_size, rng, 0)?;
    let mut done = 0;
    let mut out = Vec::with_capacity(steps.len());
    for &k in steps {
        current = gibbs_steps(model, &current, k - done, rng)?;
        done = k;
        out.push((k, current.clone()));
    }
    Ok(out)
}

/// Reconstruction error of belief-generated samples after each requested
/// number of Gibbs sweeps.
pub fn recon_error_vs_steps(
    model: &RbmModel,
    stats: &DataStats,
    batch_size: usize,
    steps: &[usize],
    rng: &mut StreamRng,
) -> Result<Vec<(usize, f64)>> {
    let snapshots = gibbs_snapshots(model, stats, batch_size, steps, rng)?;
    let mut eval_rng = rng.fork();
    snapshots
        .iter()
        .map(|(k, batch)| Ok((*k, recon_error(model, batch, &mut eval_rng)?)))
        .collect()
}

/// CSV log under [`METRICS_CSV_HEADER`]. The `wall_ms` field is left empty
/// unless `include_wall_time`, so logs are reproducible by default.
pub fn metrics_csv(records: &[MetricsRecord], include_wall_time: bool) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in records {
        let wall = if include_wall_time {
            r.wall_ms.to_string()
        } else {
            String::new()
        };
        out.push_str(&format!(
            "{},{:.6},{:.6},{}\n",
            r.epoch, r.energy_coefficient, r.recon_error, wall
        ));
    }
    out
}
