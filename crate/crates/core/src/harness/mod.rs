//! Training and evaluation orchestration: the plan, act, store, fit loop,
//! metrics, checkpoints, evaluation and learning-curve plots.

mod checkpoint;
mod config;
mod eval;
mod metrics;
mod plot;
mod run;

pub use checkpoint::Checkpoint;
pub use config::{RunConfig, RunSection};
pub use eval::{eval_checkpoint, eval_policy, EvalSummary, FixedPolicy};
pub use metrics::{parse_metrics, sliding_window, MetricsRow, RowStatus, METRICS_HEADER};
pub use plot::{plot_metrics, render_svg, PlotSeries};
pub use run::{resume_run, train_run, RunSummary, SeedRun, StepRecord};

use thiserror::Error;

use crate::envs::{EnvError, Task};
use crate::planner::PlanError;
use crate::worldmodel::ModelError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("model diverged: {0}")]
    Divergence(String),
    #[error(
        "checkpoint dimensions (obs {}, action {}) do not match environment (obs {}, action {})",
        checkpoint.0, checkpoint.1, env.0, env.1
    )]
    DimensionMismatch {
        checkpoint: (usize, usize),
        env: (usize, usize),
    },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl HarnessError {
    /// Process exit code: 1 configuration, 2 runtime divergence, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::DimensionMismatch { .. } => 1,
            HarnessError::Env(EnvError::InvalidConfig(_)) => 1,
            HarnessError::Model(ModelError::InvalidConfig(_)) => 1,
            HarnessError::Plan(PlanError::InvalidConfig(_)) => 1,
            HarnessError::Io(_) => 3,
            _ => 2,
        }
    }
}

/// Per-episode bookkeeping shared by training and evaluation.
#[derive(Clone, Debug, Default)]
pub(crate) struct EpisodeTally {
    pub ret: f64,
    pub steps: usize,
    pub reached: bool,
    pub abs_shear: f64,
}

impl EpisodeTally {
    pub fn add(&mut self, reward: f64, info: &crate::envs::StepInfo) {
        self.ret += reward;
        self.steps += 1;
        self.reached |= info.success;
        if let Some(s) = info.shear {
            self.abs_shear += s.abs();
        }
    }

    pub fn mean_abs_shear(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.abs_shear / self.steps as f64
        }
    }

    /// Slope: the goal was reached. Screw: mean |shear| within the band.
    pub fn success(&self, env: &crate::envs::EnvConfig) -> bool {
        match env.task {
            Task::Slope => self.reached,
            Task::Screw => self.steps > 0 && self.mean_abs_shear() <= env.screw.success_shear,
        }
    }
}

#[cfg(test)]
mod tests;
