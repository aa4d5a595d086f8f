//! Action selection: scores candidate action sequences by the negative free
//! energy of the expected future over imagined rollouts and optimizes them
//! with the cross-entropy method.

mod belief;
mod cem;
mod rollout;

pub use belief::{info_gain, moment_match, GaussianBelief};
pub(crate) use belief::info_gain_from_log_var;
pub use cem::{cem_plan, ActionSequenceDistribution, IterationTrace, PlanResult, PlanTrace};
pub use rollout::{rollout_feef, FeefObjective, MemberDynamics, RewardModel};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::worldmodel::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("dimension {got} does not match expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("variance must be positive and finite")]
    InvalidVariance,
    #[error("no ensemble members")]
    EmptyEnsemble,
    #[error("action component outside [-1, 1]")]
    ActionOutOfBounds,
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Value of one action sequence. `total = extrinsic + beta * info_gain`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeefBreakdown {
    pub extrinsic: f64,
    pub info_gain: f64,
    pub total: f64,
    /// Set when a non-finite state cut the rollout short.
    pub truncated: bool,
}

impl FeefBreakdown {
    pub fn from_parts(extrinsic: f64, info_gain: f64, beta: f64, truncated: bool) -> Self {
        Self {
            extrinsic,
            info_gain,
            total: extrinsic + beta * info_gain,
            truncated,
        }
    }
}

/// Scores a batch of candidate sequences. Higher `total` is better.
pub trait SequenceObjective {
    fn action_dim(&self) -> usize;

    /// `seqs` holds `n` sequences of `horizon` actions, laid out
    /// `[candidate][step][action]`. Writes one breakdown per candidate, in
    /// candidate order.
    fn score_batch(
        &mut self,
        seqs: &[f64],
        n: usize,
        horizon: usize,
        out: &mut Vec<FeefBreakdown>,
    ) -> Result<(), PlanError>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Candidate sequences per iteration (N).
    pub population: usize,
    /// Elites kept for the refit (E).
    pub elites: usize,
    /// Refit iterations (I).
    pub iterations: usize,
    /// Planning horizon (H).
    pub horizon: usize,
    /// Weight of the information-gain term.
    pub beta: f64,
    /// Weight of the previous distribution in each refit.
    pub smoothing: f64,
    pub std_floor: f64,
    pub init_std: f64,
    /// Initialize each call from the previous plan shifted by one step.
    pub warm_start: bool,
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            population: 300,
            elites: 30,
            iterations: 6,
            horizon: 12,
            beta: 1.0,
            smoothing: 0.1,
            std_floor: 0.05,
            init_std: 0.5,
            warm_start: false,
            seed: 0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: &str| Err(PlanError::InvalidConfig(m.to_string()));
        if self.population == 0 {
            return bad("population must be positive");
        }
        if self.elites == 0 || self.elites > self.population {
            return bad("elites must lie in 1..=population");
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return bad("beta must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.smoothing) {
            return bad("smoothing must lie in [0, 1)");
        }
        if !(self.std_floor.is_finite() && self.std_floor > 0.0) {
            return bad("std_floor must be positive");
        }
        if !(self.init_std.is_finite() && self.init_std > 0.0) {
            return bad("init_std must be positive");
        }
        Ok(())
    }
}
