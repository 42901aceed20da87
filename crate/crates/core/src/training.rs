//! CD-0 training with belief-generated negative samples, and the CD-k baseline.

use std::time::Instant;

use ndarray::{Array1, Array2, Zip};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{minibatch_indices, DataStats, DEFAULT_THRESHOLD};
use crate::error::{check_dim, RbmError, Result};
use crate::metrics::{energy_coefficient, recon_error, MetricsRecord};
use crate::rbm::{nll_gradient, GradientPair, RbmModel};
use crate::rng::{mix64, StreamRng};
use crate::sampling::{belief_generate, gibbs_steps};
use crate::spin::SpinBatch;

/// Where the negative-phase samples come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeMode {
    /// Belief generation with no Gibbs refinement.
    BeliefCd0,
    /// `k` Gibbs sweeps started at the data batch.
    CdKFromData,
}

/// Which samples the per-epoch metrics are computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSplit {
    Holdout,
    Train,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub init_std: f64,
    pub seed: u64,
    pub negative_mode: NegativeMode,
    /// Gibbs sweeps for [`NegativeMode::CdKFromData`].
    pub k: usize,
    pub binarize_threshold: f64,
    pub eval_every: usize,
    /// Samples per side for metric estimation.
    pub metric_batch: usize,
    pub metric_split: MetricSplit,
    /// Train on the first `n` training images only.
    pub max_train_samples: Option<usize>,
}

impl TrainConfig {
    /// 512 hidden units, 300 epochs, batch 1024, lr 1e-3, init std 0.1.
    pub fn paper() -> Self {
        TrainConfig {
            n_hidden: 512,
            epochs: 300,
            batch_size: 1024,
            learning_rate: 1e-3,
            init_std: 0.1,
            seed: 0,
            negative_mode: NegativeMode::BeliefCd0,
            k: 1,
            binarize_threshold: DEFAULT_THRESHOLD,
            eval_every: 1,
            metric_batch: 1024,
            metric_split: MetricSplit::Holdout,
            max_train_samples: None,
        }
    }

    /// Scaled-down profile: 128 hidden units, 20 epochs, batch 256, 10k images.
    pub fn desk() -> Self {
        TrainConfig {
            n_hidden: 128,
            epochs: 20,
            batch_size: 256,
            max_train_samples: Some(10_000),
            ..TrainConfig::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(RbmError::Config(msg));
        if self.n_hidden == 0 {
            return fail("n_hidden must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.eval_every == 0 {
            return fail("eval_every must be at least 1".into());
        }
        if self.metric_batch == 0 {
            return fail("metric_batch must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return fail(format!(
                "init_std must be non-negative, got {}",
                self.init_std
            ));
        }
        if !(self.binarize_threshold > 0.0 && self.binarize_threshold < 1.0) {
            return fail(format!(
                "binarize_threshold must lie in (0, 1), got {}",
                self.binarize_threshold
            ));
        }
        if self.max_train_samples == Some(0) {
            return fail("max_train_samples must be at least 1".into());
        }
        Ok(())
    }
}

/// `W ~ N(0, init_std²)` i.i.d., `b = 0`, centering fixed to `mean`.
pub fn init_model(
    n_visible: usize,
    n_hidden: usize,
    init_std: f64,
    mean: &Array1<f64>,
    seed: u64,
) -> Result<RbmModel> {
    check_dim("init_model centering", n_visible, mean.len())?;
    let weights = if init_std == 0.0 {
        Array2::zeros((n_visible, n_hidden))
    } else {
        let normal =
            Normal::new(0.0, init_std).map_err(|e| RbmError::Config(format!("init_std: {e}")))?;
        let mut rng = StreamRng::new(seed).serial();
        Array2::from_shape_simple_fn((n_visible, n_hidden), || normal.sample(&mut rng))
    };
    RbmModel::new(weights, Array1::zeros(n_visible), mean.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m_bias: Array1<f64>,
    pub m_weights: Array2<f64>,
    pub v_bias: Array1<f64>,
    pub v_weights: Array2<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_visible: usize, n_hidden: usize) -> Self {
        AdamState {
            m_bias: Array1::zeros(n_visible),
            m_weights: Array2::zeros((n_visible, n_hidden)),
            v_bias: Array1::zeros(n_visible),
            v_weights: Array2::zeros((n_visible, n_hidden)),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update of `b` and `W` along `-grads`. The centering is untouched.
/// A non-finite gradient is rejected before anything is modified.
pub fn adam_step(
    state: &mut AdamState,
    grads: &GradientPair,
    learning_rate: f64,
    model: &mut RbmModel,
) -> Result<()> {
    check_dim("adam_step bias", model.n_visible(), grads.d_bias.len())?;
    check_dim(
        "adam_step bias state",
        model.n_visible(),
        state.m_bias.len(),
    )?;
    if grads.d_weights.dim() != model.weights.dim() {
        return Err(RbmError::shape(
            "adam_step weights",
            model.weights.len(),
            grads.d_weights.len(),
        ));
    }
    if state.m_weights.dim() != model.weights.dim() {
        return Err(RbmError::shape(
            "adam_step weight state",
            model.weights.len(),
            state.m_weights.len(),
        ));
    }
    if !grads.is_finite() {
        return Err(RbmError::NonFinite("gradient"));
    }

    state.t += 1;
    let t = state.t as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let correction1 = 1.0 - b1.powi(t);
    let correction2 = 1.0 - b2.powi(t);
    let update = |theta: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *theta -= learning_rate * m_hat / (v_hat.sqrt() + eps);
    };

    Zip::from(&mut model.visible_bias)
        .and(&mut state.m_bias)
        .and(&mut state.v_bias)
        .and(&grads.d_bias)
        .for_each(|theta, m, v, &g| update(theta, m, v, g));
    Zip::from(&mut model.weights)
        .and(&mut state.m_weights)
        .and(&mut state.v_weights)
        .and(&grads.d_weights)
        .par_for_each(|theta, m, v, &g| update(theta, m, v, g));
    Ok(())
}

/// Trained parameters, optimizer state and metric history.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: RbmModel,
    pub adam: AdamState,
    pub metrics: Vec<MetricsRecord>,
}

/// Epoch-by-epoch training driver.
pub struct Trainer<'a> {
    data: &'a SpinBatch,
    stats: &'a DataStats,
    holdout: Option<&'a SpinBatch>,
    config: TrainConfig,
    model: RbmModel,
    adam: AdamState,
    rng: StreamRng,
    epoch: usize,
    started: Instant,
}

impl<'a> Trainer<'a> {
    pub fn new(
        data: &'a SpinBatch,
        stats: &'a DataStats,
        config: &TrainConfig,
        holdout: Option<&'a SpinBatch>,
    ) -> Result<Self> {
        config.validate()?;
        data.require_nonempty("training data")?;
        check_dim("training statistics", data.width(), stats.n_visible())?;
        if let Some(h) = holdout {
            check_dim("holdout", data.width(), h.width())?;
            h.require_nonempty("holdout")?;
        }
        let n_v = data.width();
        let model = init_model(
            n_v,
            config.n_hidden,
            config.init_std,
            &stats.mean,
            config.seed,
        )?;
        Ok(Trainer {
            data,
            stats,
            holdout,
            config: config.clone(),
            model,
            adam: AdamState::new(n_v, config.n_hidden),
            rng: StreamRng::new(mix64(config.seed ^ 0x7472_6169_6e00)),
            epoch: 0,
            started: Instant::now(),
        })
    }

    pub fn model(&self) -> &RbmModel {
        &self.model
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn into_parts(self) -> (RbmModel, AdamState) {
        (self.model, self.adam)
    }

    fn negative_batch(&mut self, positive: &SpinBatch) -> Result<SpinBatch> {
        match self.config.negative_mode {
            NegativeMode::BeliefCd0 => {
                belief_generate(&self.model, self.stats, positive.len(), &mut self.rng, 0)
            }
            NegativeMode::CdKFromData => {
                gibbs_steps(&self.model, positive, self.config.k, &mut self.rng)
            }
        }
    }

    pub fn run_epoch(&mut self) -> Result<()> {
        self.epoch += 1;
        let batch_size = self.config.batch_size.min(self.data.len());
        let chunks = minibatch_indices(
            self.data.len(),
            batch_size,
            self.config.seed,
            self.epoch as u64,
        )?;
        for idx in chunks {
            let positive = self.data.select(&idx);
            let negative = self.negative_batch(&positive)?;
            let grads = nll_gradient(&self.model, &positive, &negative)?;
            adam_step(
                &mut self.adam,
                &grads,
                self.config.learning_rate,
                &mut self.model,
            )
            .map_err(|e| RbmError::Diverged {
                epoch: self.epoch,
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Metrics for the current parameters. Uses its own random stream keyed by
    /// the epoch, so evaluating never perturbs the training trajectory.
    pub fn evaluate(&self) -> Result<MetricsRecord> {
        let source = match (self.config.metric_split, self.holdout) {
            (MetricSplit::Holdout, Some(h)) => h,
            _ => self.data,
        };
        let reference = source.head(self.config.metric_batch);
        let mut rng = StreamRng::new(mix64(self.config.seed) ^ mix64(self.epoch as u64 + 1));
        let generated = belief_generate(&self.model, self.stats, reference.len(), &mut rng, 0)?;
        let record = MetricsRecord {
            epoch: self.epoch,
            energy_coefficient: energy_coefficient(&reference, &generated)?,
            recon_error: recon_error(&self.model, &reference, &mut rng)?,
            wall_ms: self.started.elapsed().as_millis() as u64,
        };
        if !(record.energy_coefficient.is_finite() && record.recon_error.is_finite()) {
            return Err(RbmError::Diverged {
                epoch: self.epoch,
                reason: "non-finite metrics".into(),
            });
        }
        Ok(record)
    }

    fn should_evaluate(&self) -> bool {
        self.epoch.is_multiple_of(self.config.eval_every) || self.epoch == self.config.epochs
    }
}

/// Runs every epoch of `config`, calling `on_eval` after each evaluation with
/// the fresh record and the current parameters.
pub fn train_with<F>(
    data: &SpinBatch,
    stats: &DataStats,
    config: &TrainConfig,
    holdout: Option<&SpinBatch>,
    mut on_eval: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&MetricsRecord, &RbmModel, &AdamState) -> Result<()>,
{
    let mut trainer = Trainer::new(data, stats, config, holdout)?;
    let mut metrics = Vec::new();
    while trainer.epoch() < config.epochs {
        trainer.run_epoch()?;
        if trainer.should_evaluate() {
            let record = trainer.evaluate()?;
            on_eval(&record, trainer.model(), trainer.adam())?;
            metrics.push(record);
        }
    }
    let (model, adam) = trainer.into_parts();
    Ok(TrainOutcome {
        model,
        adam,
        metrics,
    })
}

pub fn train(
    data: &SpinBatch,
    stats: &DataStats,
    config: &TrainConfig,
    holdout: Option<&SpinBatch>,
) -> Result<TrainOutcome> {
    train_with(data, stats, config, holdout, |_, _, _| Ok(()))
}
