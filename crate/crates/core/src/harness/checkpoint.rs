use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HarnessError, RunConfig};
use crate::worldmodel::{EnsembleDynamics, ReplayBuffer, RewardHead};

const FORMAT: u32 = 1;

/// Complete state of one seed's run after `next_episode` episodes.
///
/// Every random draw is derived from (seed, stream, episode, step), so the
/// models, their optimizer moments and the buffer are all the state a resume
/// needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub config: RunConfig,
    pub seed: u64,
    pub next_episode: usize,
    pub model: EnsembleDynamics,
    pub head: RewardHead,
    pub buffer: ReplayBuffer,
    /// Returns of all finished episodes, for the sliding window.
    pub returns: Vec<f64>,
}

impl Checkpoint {
    pub(crate) fn new(
        config: RunConfig,
        seed: u64,
        next_episode: usize,
        model: EnsembleDynamics,
        head: RewardHead,
        buffer: ReplayBuffer,
        returns: Vec<f64>,
    ) -> Self {
        Self {
            format: FORMAT,
            config,
            seed,
            next_episode,
            model,
            head,
            buffer,
            returns,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.model.obs_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.model.action_dim()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let ck: Checkpoint = serde_json::from_str(text)
            .map_err(|e| HarnessError::Config(format!("unreadable checkpoint: {e}")))?;
        if ck.format != FORMAT {
            return Err(HarnessError::Config(format!(
                "checkpoint format {} is not supported",
                ck.format
            )));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json())
            .map_err(|e| HarnessError::Io(format!("{}: {e}", tmp.display())))?;
        std::fs::rename(&tmp, path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
