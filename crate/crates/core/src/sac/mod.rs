//! Soft Actor-Critic.
//!
//! A squashed-Gaussian actor, twin soft Q critics with Polyak-averaged
//! targets and a learned entropy temperature. Networks, gradients and the
//! optimiser are implemented here on top of `ndarray`.

mod adam;
mod agent;
pub mod checkpoint;
mod mlp;
pub mod policy;
mod replay;
pub mod train;

pub use adam::Adam;
pub use agent::{Agent, Batch, Losses};
pub use mlp::{flatten_grads, Layer, Mlp, Trace};
pub use replay::{ReplayBuffer, Transition};
pub use train::{evaluate, EvalEpisode, MetricsRow, Trainer};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::EnvError;

#[derive(Debug, Error)]
pub enum SacError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("non-finite {loss} loss at update {update}: {detail}")]
    NonFiniteLoss {
        loss: &'static str,
        update: u64,
        detail: String,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    pub gamma: f64,
    pub lr: f64,
    /// Fraction of the old target kept at each update.
    pub polyak: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub target_entropy: f64,
    pub initial_alpha: f64,
    pub updates_per_stride: usize,
    /// Strides of uniformly random actions before learning starts.
    pub warmup_strides: usize,
    pub hidden: Vec<usize>,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lr: 3e-4,
            polyak: 0.995,
            batch_size: 256,
            buffer_capacity: 1_000_000,
            target_entropy: 0.0,
            initial_alpha: 0.2,
            updates_per_stride: 1,
            warmup_strides: 2000,
            hidden: vec![256, 256],
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), SacError> {
        let bad = |m: &str| Err(SacError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.polyak > 0.0 && self.polyak < 1.0) {
            return bad("polyak must lie in (0, 1)");
        }
        if !(self.lr > 0.0 && self.initial_alpha > 0.0) {
            return bad("lr and initial_alpha must be positive");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("batch_size must be positive and at most buffer_capacity");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        if !self.target_entropy.is_finite() {
            return bad("target_entropy must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Write a checkpoint every this many episodes; 0 keeps only the final one.
    pub checkpoint_every: usize,
    pub eval_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 300,
            checkpoint_every: 50,
            eval_episodes: 50,
        }
    }
}
