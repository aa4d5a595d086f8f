//! Seeded desk-scale tasks: pushing a ball or box up a slope into a goal
//! region, and tightening a screw of unknown pitch by touch.

mod render;
mod screw;
mod slope;

pub use render::{render_contact_depth, ContactPose, SensorGeometry};
pub use screw::{ScrewEnv, ScrewParams};
pub use slope::{SlopeEnv, SlopeParams};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tactile::{DepthGrid, FlowField, TactileError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("step called before reset")]
    NotReset,
    #[error("episode is done; reset before stepping")]
    EpisodeDone,
    #[error("action has {got} components, expected {expected}")]
    ActionDimension { expected: usize, got: usize },
    #[error("action component outside [-1, 1] or non-finite")]
    ActionOutOfBounds,
    #[error("invalid environment configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Tactile(#[from] TactileError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Slope,
    Screw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    Dense,
    Sparse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Ball,
    Box,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub task: Task,
    /// Slope task only.
    pub reward: RewardMode,
    /// Slope task only.
    pub shape: Shape,
    /// Steps per episode; 60 for the slope and 40 for the screw when unset.
    pub max_steps: Option<usize>,
    /// Tactile image side length in pixels.
    pub sensor_resolution: usize,
    pub slope: SlopeParams,
    pub screw: ScrewParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            task: Task::Slope,
            reward: RewardMode::Dense,
            shape: Shape::Ball,
            max_steps: None,
            sensor_resolution: 16,
            slope: SlopeParams::default(),
            screw: ScrewParams::default(),
        }
    }
}

impl EnvConfig {
    pub fn max_steps(&self) -> usize {
        self.max_steps.unwrap_or(match self.task {
            Task::Slope => 60,
            Task::Screw => 40,
        })
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.max_steps() == 0 {
            return Err(EnvError::InvalidConfig("max_steps must be at least 1".into()));
        }
        if self.sensor_resolution < 8 {
            return Err(EnvError::InvalidConfig(
                "sensor_resolution must be at least 8".into(),
            ));
        }
        match self.task {
            Task::Slope => self.slope.validate(),
            Task::Screw => self.screw.validate(),
        }
    }

    pub fn obs_dim(&self) -> usize {
        match (self.task, self.shape) {
            (Task::Screw, _) => screw::OBS_DIM,
            (Task::Slope, Shape::Ball) => slope::BALL_OBS_DIM,
            (Task::Slope, Shape::Box) => slope::BOX_OBS_DIM,
        }
    }

    pub fn action_dim(&self) -> usize {
        match self.task {
            Task::Slope => 3,
            Task::Screw => 1,
        }
    }
}

/// Per-step diagnostics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    /// Object-to-goal distance (slope).
    pub distance: Option<f64>,
    /// Accumulated gel shear in mm (screw).
    pub shear: Option<f64>,
    /// Whether the sensor touches the object.
    pub contact: bool,
    /// Goal reached (slope) or shear kept within the success band (screw,
    /// judged per episode by the harness).
    pub success: bool,
}

/// Raw tactile signals behind the tactile part of the observation.
#[derive(Clone, Debug, PartialEq)]
pub struct TactileFrame {
    pub depth: DepthGrid,
    pub flow: Option<FlowField>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
    pub tactile: TactileFrame,
}

fn check_action(action: &[f64], expected: usize) -> Result<(), EnvError> {
    if action.len() != expected {
        return Err(EnvError::ActionDimension {
            expected,
            got: action.len(),
        });
    }
    if action.iter().any(|a| !(-1.0..=1.0).contains(a)) {
        return Err(EnvError::ActionOutOfBounds);
    }
    Ok(())
}

/// Either task behind one interface.
#[derive(Clone, Debug)]
pub enum Env {
    Slope(SlopeEnv),
    Screw(ScrewEnv),
}

impl Env {
    pub fn new(cfg: &EnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        Ok(match cfg.task {
            Task::Slope => Env::Slope(SlopeEnv::new(cfg.clone())?),
            Task::Screw => Env::Screw(ScrewEnv::new(cfg.clone())?),
        })
    }

    pub fn obs_dim(&self) -> usize {
        match self {
            Env::Slope(e) => e.obs_dim(),
            Env::Screw(_) => screw::OBS_DIM,
        }
    }

    pub fn action_dim(&self) -> usize {
        match self {
            Env::Slope(_) => 3,
            Env::Screw(_) => 1,
        }
    }

    pub fn reset(&mut self, seed: u64) -> Result<StepResult, EnvError> {
        match self {
            Env::Slope(e) => e.reset(seed),
            Env::Screw(e) => e.reset(seed),
        }
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        match self {
            Env::Slope(e) => e.step(action),
            Env::Screw(e) => e.step(action),
        }
    }

    /// Scripted policy with access to the true state.
    pub fn oracle_action(&self) -> Result<Vec<f64>, EnvError> {
        match self {
            Env::Slope(e) => e.oracle_action(),
            Env::Screw(e) => e.oracle_action(),
        }
    }
}

#[cfg(test)]
mod tests;
