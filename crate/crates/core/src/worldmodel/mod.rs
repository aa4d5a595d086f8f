//! Replay storage and the learned generative model: a probabilistic ensemble
//! over next observations and a reward head over observations.

mod buffer;
mod ensemble;
mod fit;
mod normalizer;

pub use buffer::{fmt_num, ReplayBuffer, Transition};
pub use ensemble::{EnsembleBatch, EnsembleDynamics, RewardBatch, RewardHead, TrainedNet};
pub use fit::{fit_models, FitOptions, TrainReport};
pub use normalizer::{Normalizer, DEGENERATE_VARIANCE, STD_FLOOR};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numcore::NetError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{what} dimension {got} does not match expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("action component outside [-1, 1]")]
    ActionOutOfBounds,
    #[error("non-finite value in transition or prediction")]
    NonFinite,
    #[error("normalizer has fewer than two samples")]
    NormalizerNotReady,
    #[error("insufficient data: {have} transitions, need {need}")]
    InsufficientData { have: usize, need: usize },
    #[error("training diverged (member {member:?}): {source}")]
    Divergence {
        member: Option<usize>,
        #[source]
        source: NetError,
    },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// World-model sizes and fitting schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of ensemble members (K >= 2).
    pub ensemble_size: usize,
    /// Hidden layer widths shared by the members and the reward head.
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Passes over the buffer per fit.
    pub epochs: usize,
    pub holdout_fraction: f64,
    /// Replay capacity in transitions.
    pub buffer_capacity: usize,
    /// Cap on minibatch updates per network per fit.
    pub max_updates: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            ensemble_size: 5,
            hidden: vec![64, 64],
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 30,
            holdout_fraction: 0.1,
            buffer_capacity: 100_000,
            max_updates: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.ensemble_size < 2 {
            return bad("ensemble_size must be at least 2");
        }
        if self.hidden.iter().any(|h| *h == 0) {
            return bad("hidden widths must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return bad("holdout_fraction must lie in [0, 1)");
        }
        if self.max_updates == Some(0) {
            return bad("max_updates must be positive when set");
        }
        if self.buffer_capacity == 0 {
            return bad("buffer_capacity must be positive");
        }
        Ok(())
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            epochs: self.epochs,
            batch_size: self.batch_size,
            holdout_fraction: self.holdout_fraction,
            max_updates: self.max_updates,
        }
    }
}
