//! Spin RBM with centered visible units and no explicit hidden bias.
//!
//! Joint energy:
//!
//! ```text
//! U(v, h) = -b·(v - mu) - (v - mu)ᵀ W h
//! ```
//!
//! so `p(h | v) ∝ exp(phiᵀ h)` with `phi = Wᵀ (v - mu)`, and each hidden spin has
//! mean `tanh(phi_i)`. Likewise `p(v_j = +1 | h) = logistic(2 (b + W h)_j)`.

use ndarray::{Array1, Array2, ArrayView1, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, RbmError, Result};
use crate::spin::SpinBatch;

/// Largest `n_visible + n_hidden` accepted by the exact enumeration routines.
pub const ENUMERATION_LIMIT: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbmModel {
    /// Couplings, `n_visible x n_hidden`.
    pub weights: Array2<f64>,
    pub visible_bias: Array1<f64>,
    /// Fixed at the data mean; never touched by the optimizer.
    pub centering: Array1<f64>,
}

/// Descent direction of the negative log-likelihood with respect to `(b, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPair {
    pub d_bias: Array1<f64>,
    pub d_weights: Array2<f64>,
}

impl GradientPair {
    pub fn is_finite(&self) -> bool {
        self.d_bias
            .iter()
            .chain(self.d_weights.iter())
            .all(|x| x.is_finite())
    }
}

impl RbmModel {
    pub fn new(
        weights: Array2<f64>,
        visible_bias: Array1<f64>,
        centering: Array1<f64>,
    ) -> Result<Self> {
        let n_v = weights.nrows();
        check_dim("RbmModel visible bias", n_v, visible_bias.len())?;
        check_dim("RbmModel centering", n_v, centering.len())?;
        if !weights
            .iter()
            .chain(visible_bias.iter())
            .chain(centering.iter())
            .all(|x| x.is_finite())
        {
            return Err(RbmError::NonFinite("RbmModel parameters"));
        }
        if centering.iter().any(|m| m.abs() > 1.0) {
            return Err(RbmError::Config(
                "centering entries must lie in [-1, 1]".into(),
            ));
        }
        Ok(RbmModel {
            weights,
            visible_bias,
            centering,
        })
    }

    /// All-zero parameters with zero centering.
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        RbmModel {
            weights: Array2::zeros((n_visible, n_hidden)),
            visible_bias: Array1::zeros(n_visible),
            centering: Array1::zeros(n_visible),
        }
    }

    pub fn n_visible(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_hidden(&self) -> usize {
        self.weights.ncols()
    }

    fn centered(&self, v: ArrayView1<'_, i8>) -> Array1<f64> {
        Zip::from(&v)
            .and(&self.centering)
            .map_collect(|&s, &m| f64::from(s) - m)
    }

    pub fn energy(&self, v: ArrayView1<'_, i8>, h: ArrayView1<'_, i8>) -> Result<f64> {
        check_dim("energy visible", self.n_visible(), v.len())?;
        check_dim("energy hidden", self.n_hidden(), h.len())?;
        let c = self.centered(v);
        let hf = h.mapv(f64::from);
        Ok(-self.visible_bias.dot(&c) - c.dot(&self.weights.dot(&hf)))
    }

    /// `phi = Wᵀ (v - mu)`.
    pub fn hidden_field(&self, v: ArrayView1<'_, i8>) -> Result<Array1<f64>> {
        check_dim("hidden_field", self.n_visible(), v.len())?;
        Ok(self.weights.t().dot(&self.centered(v)))
    }

    /// `E[h | v] = tanh(phi)`.
    pub fn hidden_mean(&self, v: ArrayView1<'_, i8>) -> Result<Array1<f64>> {
        Ok(self.hidden_field(v)?.mapv(f64::tanh))
    }

    /// `b + W h`.
    pub fn visible_field(&self, h: ArrayView1<'_, i8>) -> Result<Array1<f64>> {
        check_dim("visible_field", self.n_hidden(), h.len())?;
        Ok(&self.visible_bias + &self.weights.dot(&h.mapv(f64::from)))
    }

    /// Row-wise `(V - mu)`, as floats.
    pub fn centered_batch(&self, v: &SpinBatch) -> Result<Array2<f64>> {
        check_dim("centered_batch", self.n_visible(), v.width())?;
        Ok(v.to_f64() - &self.centering)
    }

    /// Hidden fields for every row of `v`, `B x n_hidden`.
    pub fn hidden_fields(&self, v: &SpinBatch) -> Result<Array2<f64>> {
        Ok(self.centered_batch(v)?.dot(&self.weights))
    }

    /// Visible fields for every row of `h`, `B x n_visible`.
    pub fn visible_fields(&self, h: &SpinBatch) -> Result<Array2<f64>> {
        check_dim("visible_fields", self.n_hidden(), h.width())?;
        Ok(h.to_f64().dot(&self.weights.t()) + &self.visible_bias)
    }

    /// `-log sum_h exp(-U(v, h))`, the free energy with the hidden layer summed out.
    pub fn free_energy(&self, v: ArrayView1<'_, i8>) -> Result<f64> {
        let phi = self.hidden_field(v)?;
        let c = self.centered(v);
        Ok(-self.visible_bias.dot(&c) - phi.iter().map(|&x| log_two_cosh(x)).sum::<f64>())
    }
}

/// `log(2 cosh x)` without overflow.
pub(crate) fn log_two_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// Spin configuration encoded by the low `n` bits of `index` (bit set means +1).
pub fn spin_config(index: u64, n: usize) -> Vec<i8> {
    (0..n)
        .map(|j| if (index >> j) & 1 == 1 { 1 } else { -1 })
        .collect()
}

/// Every spin configuration of `n` units, row `i` encoded as in [`spin_config`].
pub fn all_spin_configs(n: usize) -> SpinBatch {
    let count = 1usize << n;
    let mut data = Array2::zeros((count, n));
    for (i, mut row) in data.rows_mut().into_iter().enumerate() {
        for (j, s) in spin_config(i as u64, n).into_iter().enumerate() {
            row[j] = s;
        }
    }
    SpinBatch::from_trusted(data)
}

fn enumeration_guard(model: &RbmModel) -> Result<()> {
    let units = model.n_visible() + model.n_hidden();
    if units > ENUMERATION_LIMIT {
        return Err(RbmError::TooLarge {
            units,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
struct LogSumExp {
    max: f64,
    scaled_sum: f64,
}

impl LogSumExp {
    fn new() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            scaled_sum: 0.0,
        }
    }

    fn push(&mut self, x: f64) {
        if x <= self.max {
            self.scaled_sum += (x - self.max).exp();
        } else {
            self.scaled_sum = self.scaled_sum * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    fn value(&self) -> f64 {
        self.max + self.scaled_sum.ln()
    }
}

/// Negative log of the unnormalized marginal of `v`, by explicit summation over
/// every hidden configuration.
fn enumerated_log_marginal(
    model: &RbmModel,
    v: ArrayView1<'_, i8>,
    hidden: &SpinBatch,
) -> Result<f64> {
    let mut acc = LogSumExp::new();
    for h in hidden.view().rows() {
        acc.push(-model.energy(v, h)?);
    }
    Ok(acc.value())
}

/// Exact mean negative log-likelihood of `data`, summing `exp(-U)` over all
/// `2^(n_v + n_h)` joint states. Refuses models with more than
/// [`ENUMERATION_LIMIT`] units.
pub fn exact_nll(model: &RbmModel, data: &SpinBatch) -> Result<f64> {
    enumeration_guard(model)?;
    data.require_nonempty("exact_nll")?;
    check_dim("exact_nll", model.n_visible(), data.width())?;
    let visible = all_spin_configs(model.n_visible());
    let hidden = all_spin_configs(model.n_hidden());

    let mut log_z = LogSumExp::new();
    for v in visible.view().rows() {
        for h in hidden.view().rows() {
            log_z.push(-model.energy(v, h)?);
        }
    }
    let log_z = log_z.value();

    let mut total = 0.0;
    for v in data.view().rows() {
        total += log_z - enumerated_log_marginal(model, v, &hidden)?;
    }
    Ok(total / data.len() as f64)
}

/// Exact `p(v)` for every visible configuration, indexed as in [`all_spin_configs`].
pub fn exact_visible_distribution(model: &RbmModel) -> Result<Vec<f64>> {
    enumeration_guard(model)?;
    let visible = all_spin_configs(model.n_visible());
    let log_w: Vec<f64> = visible
        .view()
        .rows()
        .into_iter()
        .map(|v| model.free_energy(v).map(|f| -f))
        .collect::<Result<_>>()?;
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = log_w.iter().map(|&x| (x - max).exp()).collect();
    let z: f64 = unnorm.iter().sum();
    Ok(unnorm.into_iter().map(|w| w / z).collect())
}

/// First and second moments that enter the likelihood gradient for one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMoments {
    /// `<v>`
    pub mean_visible: Array1<f64>,
    /// `<(v - mu) tanh(Wᵀ(v - mu))ᵀ>`
    pub mean_outer: Array2<f64>,
}

impl PhaseMoments {
    /// Uniform average over the rows of `batch`.
    pub fn from_batch(model: &RbmModel, batch: &SpinBatch) -> Result<Self> {
        batch.require_nonempty("PhaseMoments::from_batch")?;
        let centered = model.centered_batch(batch)?;
        let tanh = centered.dot(&model.weights).mapv(f64::tanh);
        let scale = 1.0 / batch.len() as f64;
        Ok(PhaseMoments {
            mean_visible: batch.column_mean(),
            mean_outer: centered.t().dot(&tanh) * scale,
        })
    }

    /// Average over `states` with probability weights `weights` (summing to one).
    pub fn from_weighted(model: &RbmModel, states: &SpinBatch, weights: &[f64]) -> Result<Self> {
        states.require_nonempty("PhaseMoments::from_weighted")?;
        check_dim("PhaseMoments::from_weighted", states.len(), weights.len())?;
        let w = ArrayView1::from(weights);
        let values = states.to_f64();
        let centered = model.centered_batch(states)?;
        let tanh = centered.dot(&model.weights).mapv(f64::tanh);
        let weighted_tanh = &tanh * &w.insert_axis(Axis(1));
        Ok(PhaseMoments {
            mean_visible: values.t().dot(&w),
            mean_outer: centered.t().dot(&weighted_tanh),
        })
    }
}

/// `model - data` for both moment sets; negating it descends the NLL.
pub fn gradient_from_moments(data: &PhaseMoments, model: &PhaseMoments) -> GradientPair {
    GradientPair {
        d_bias: &model.mean_visible - &data.mean_visible,
        d_weights: &model.mean_outer - &data.mean_outer,
    }
}

/// Stochastic NLL gradient: positive phase from `data_batch`, negative phase
/// from `model_batch` standing in for the model expectation.
pub fn nll_gradient(
    model: &RbmModel,
    data_batch: &SpinBatch,
    model_batch: &SpinBatch,
) -> Result<GradientPair> {
    let (positive, negative) = rayon::join(
        || PhaseMoments::from_batch(model, data_batch),
        || PhaseMoments::from_batch(model, model_batch),
    );
    Ok(gradient_from_moments(&positive?, &negative?))
}

/// NLL gradient with the negative phase computed exactly by enumerating `p(v)`.
pub fn exact_nll_gradient(model: &RbmModel, data_batch: &SpinBatch) -> Result<GradientPair> {
    let probs = exact_visible_distribution(model)?;
    let states = all_spin_configs(model.n_visible());
    let positive = PhaseMoments::from_batch(model, data_batch)?;
    let negative = PhaseMoments::from_weighted(model, &states, &probs)?;
    Ok(gradient_from_moments(&positive, &negative))
}
