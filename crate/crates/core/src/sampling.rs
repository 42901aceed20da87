//! Block Gibbs kernels and belief generation.
//!
//! For a spin `s` in a field `x`, `P(s = +1) / P(s = -1) = e^{2x}`, hence
//! `P(s = +1) = logistic(2x)`. Forgetting the factor 2 is the classic bug when
//! porting Bernoulli RBM code to spins.

use ndarray::{Array2, Zip};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::DataStats;
use crate::error::{check_dim, RbmError, Result};
use crate::rbm::RbmModel;
use crate::rng::StreamRng;
use crate::spin::SpinBatch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    /// Gibbs sweeps applied after the initial draw.
    pub k_gibbs: usize,
}

/// Hidden fields `phi`, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldBatch(pub Array2<f64>);

/// `P(s = +1)` for a spin in field `x`.
pub fn spin_up_probability(field: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * field).exp())
}

/// Draws every entry independently as +1 with probability `logistic(2 x)`.
/// Row `i` consumes lane `i` of one fresh draw key.
pub fn sample_spins(fields: &Array2<f64>, rng: &mut StreamRng) -> SpinBatch {
    let key = rng.next_draw();
    let mut out = Array2::<i8>::zeros(fields.raw_dim());
    Zip::indexed(out.rows_mut())
        .and(fields.rows())
        .par_for_each(|i, mut spins, row| {
            let mut lane = key.lane(i);
            for (s, &x) in spins.iter_mut().zip(row.iter()) {
                let u: f64 = lane.random();
                *s = if u < spin_up_probability(x) { 1 } else { -1 };
            }
        });
    SpinBatch::from_trusted(out)
}

/// `h ~ p(h | v)` for every row of `v`.
pub fn sample_hidden(model: &RbmModel, v: &SpinBatch, rng: &mut StreamRng) -> Result<SpinBatch> {
    Ok(sample_spins(&model.hidden_fields(v)?, rng))
}

/// `v ~ p(v | h)` for every row of `h`.
pub fn sample_visible(model: &RbmModel, h: &SpinBatch, rng: &mut StreamRng) -> Result<SpinBatch> {
    Ok(sample_spins(&model.visible_fields(h)?, rng))
}

/// One sweep: hidden given visible, then visible given hidden.
pub fn gibbs_sweep(model: &RbmModel, v: &SpinBatch, rng: &mut StreamRng) -> Result<SpinBatch> {
    let h = sample_hidden(model, v, rng)?;
    sample_visible(model, &h, rng)
}

/// `k` full sweeps starting from `v0`; `k = 0` returns `v0` unchanged.
pub fn gibbs_steps(
    model: &RbmModel,
    v0: &SpinBatch,
    k: usize,
    rng: &mut StreamRng,
) -> Result<SpinBatch> {
    check_dim("gibbs_steps", model.n_visible(), v0.width())?;
    let mut v = v0.clone();
    for _ in 0..k {
        v = gibbs_sweep(model, &v, rng)?;
    }
    Ok(v)
}

/// `phi = Wᵀ Q z` with `z ~ N(0, I)`, so `phi ~ N(0, Wᵀ Σ W)` without forming
/// that product.
pub fn sample_phi(
    model: &RbmModel,
    stats: &DataStats,
    batch: usize,
    rng: &mut StreamRng,
) -> Result<FieldBatch> {
    check_dim(
        "sample_phi statistics",
        model.n_visible(),
        stats.n_visible(),
    )?;
    let rank = stats.rank();
    let key = rng.next_draw();
    let mut z = Array2::<f64>::zeros((batch, rank));
    Zip::indexed(z.rows_mut()).par_for_each(|i, mut row| {
        let mut lane = key.lane(i);
        for x in row.iter_mut() {
            *x = lane.sample(StandardNormal);
        }
    });
    let projection = stats.sqrt_cov.t().dot(&model.weights);
    Ok(FieldBatch(z.dot(&projection)))
}

/// Approximate samples from `p(v)` in one backward pass: draw hidden fields
/// from their Gaussian approximation, hidden spins given the fields, then
/// visible spins given the hidden spins. `refine_k` Gibbs sweeps follow.
pub fn belief_generate(
    model: &RbmModel,
    stats: &DataStats,
    batch: usize,
    rng: &mut StreamRng,
    refine_k: usize,
) -> Result<SpinBatch> {
    if batch == 0 {
        return Err(RbmError::EmptyBatch("belief_generate"));
    }
    let phi = sample_phi(model, stats, batch, rng)?;
    let h = sample_spins(&phi.0, rng);
    let v = sample_visible(model, &h, rng)?;
    gibbs_steps(model, &v, refine_k, rng)
}
