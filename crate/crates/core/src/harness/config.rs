use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::envs::EnvConfig;
use crate::planner::PlannerConfig;
use crate::worldmodel::ModelConfig;

/// Run schedule and switches (`[run]` table).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Master seeds, one independent run each.
    pub seeds: Vec<u64>,
    /// Total episodes per seed, warmup included.
    pub episodes: usize,
    /// Leading episodes driven by uniform random actions.
    pub warmup_episodes: usize,
    /// Zero the information-gain weight.
    pub curiosity_off: bool,
    /// Uniform random actions throughout.
    pub random_policy: bool,
    pub output_dir: PathBuf,
    /// Write a checkpoint every this many episodes (0: only at the end).
    pub checkpoint_period: usize,
    /// Sliding window for the `window_mean_return` column.
    pub window: usize,
    /// Record elapsed seconds in the metrics; off keeps metrics files
    /// byte-identical across runs.
    pub wall_clock: bool,
    /// One JSON-lines file per (seed, episode) with every step.
    pub episode_logs: bool,
    /// Dump each rendered contact depth image as PGM (slope task).
    pub debug_depth_dump: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seeds: vec![0],
            episodes: 150,
            warmup_episodes: 5,
            curiosity_off: false,
            random_policy: false,
            output_dir: PathBuf::from("runs/default"),
            checkpoint_period: 25,
            window: 10,
            wall_clock: false,
            episode_logs: true,
            debug_depth_dump: false,
        }
    }
}

/// Whole run configuration as read from a TOML file with `[run]`, `[env]`,
/// `[planner]` and `[model]` tables. Unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub env: EnvConfig,
    pub planner: PlannerConfig,
    pub model: ModelConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let r = &self.run;
        if r.seeds.is_empty() {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        if r.warmup_episodes == 0 {
            return Err(HarnessError::Config("warmup_episodes must be at least 1".into()));
        }
        if r.episodes < r.warmup_episodes {
            return Err(HarnessError::Config(
                "episodes must be at least warmup_episodes".into(),
            ));
        }
        if r.window == 0 {
            return Err(HarnessError::Config("window must be at least 1".into()));
        }
        self.env
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.planner
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.model
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    /// Information-gain weight after the curiosity ablation switch.
    pub fn effective_beta(&self) -> f64 {
        if self.run.curiosity_off {
            0.0
        } else {
            self.planner.beta
        }
    }
}
