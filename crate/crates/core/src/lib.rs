//! Spin-valued (±1) restricted Boltzmann machines with centered visible units,
//! trained by zero-step contrastive divergence whose negative samples come
//! from belief generation: a Gaussian draw of the hidden field followed by a
//! single backward pass through the network.
//!
//! Modules:
//! - [`rbm`]: energy, conditional fields, exact enumeration oracles, gradient
//! - [`sampling`]: block Gibbs kernels and belief generation
//! - [`data`]: IDX ingestion, binarization, mean/covariance square root
//! - [`training`]: Adam, CD-0 / CD-k loops, presets
//! - [`metrics`]: energy coefficient and reconstruction error
//! - [`checkpoint`]: binary model files

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod metrics;
pub mod rbm;
pub mod rng;
pub mod sampling;
pub mod spin;
pub mod training;

pub use checkpoint::Checkpoint;
pub use data::{binarize, compute_stats, DataStats, Dataset};
pub use error::{RbmError, Result};
pub use metrics::{energy_coefficient, recon_error, recon_error_vs_steps, MetricsRecord};
pub use rbm::{exact_nll, nll_gradient, GradientPair, RbmModel};
pub use rng::StreamRng;
pub use sampling::{belief_generate, gibbs_steps, sample_hidden, sample_phi, sample_visible};
pub use spin::SpinBatch;
pub use training::{adam_step, init_model, train, AdamState, NegativeMode, TrainConfig};
