use std::collections::VecDeque;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{ModelError, Normalizer};

/// One environment interaction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub episode: u64,
    pub step: u64,
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

/// Bounded FIFO of transitions with running statistics of observations,
/// observation deltas and rewards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    action_dim: usize,
    data: VecDeque<Transition>,
    obs_stats: Normalizer,
    delta_stats: Normalizer,
    reward_stats: Normalizer,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, action_dim: usize) -> Result<Self, ModelError> {
        if capacity == 0 || obs_dim == 0 || action_dim == 0 {
            return Err(ModelError::InvalidConfig(
                "buffer capacity and dimensions must be positive".into(),
            ));
        }
        Ok(Self {
            capacity,
            obs_dim,
            action_dim,
            data: VecDeque::with_capacity(capacity.min(1 << 16)),
            obs_stats: Normalizer::new(obs_dim),
            delta_stats: Normalizer::new(obs_dim),
            reward_stats: Normalizer::new(1),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.data.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.data.iter()
    }

    pub fn obs_stats(&self) -> &Normalizer {
        &self.obs_stats
    }

    pub fn delta_stats(&self) -> &Normalizer {
        &self.delta_stats
    }

    pub fn reward_stats(&self) -> &Normalizer {
        &self.reward_stats
    }

    /// Stores `t`, evicting the oldest entry when full. Returns the new size.
    pub fn push(&mut self, t: Transition) -> Result<usize, ModelError> {
        if t.obs.len() != self.obs_dim || t.next_obs.len() != self.obs_dim {
            return Err(ModelError::Dimension {
                what: "observation",
                expected: self.obs_dim,
                got: if t.obs.len() != self.obs_dim {
                    t.obs.len()
                } else {
                    t.next_obs.len()
                },
            });
        }
        if t.action.len() != self.action_dim {
            return Err(ModelError::Dimension {
                what: "action",
                expected: self.action_dim,
                got: t.action.len(),
            });
        }
        if t.action.iter().any(|a| !(-1.0..=1.0).contains(a)) {
            return Err(ModelError::ActionOutOfBounds);
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&t.obs) || !finite(&t.next_obs) || !t.reward.is_finite() {
            return Err(ModelError::NonFinite);
        }
        let delta: Vec<f64> = t.next_obs.iter().zip(&t.obs).map(|(n, o)| n - o).collect();
        self.obs_stats.update(&t.obs);
        self.delta_stats.update(&delta);
        self.reward_stats.update(&[t.reward]);
        if self.data.len() == self.capacity {
            self.data.pop_front();
        }
        self.data.push_back(t);
        Ok(self.data.len())
    }

    /// Writes one JSON record per line with every number at 17 significant
    /// digits.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for t in &self.data {
            writeln!(
                out,
                "{{\"episode\":{},\"step\":{},\"obs\":{},\"action\":{},\"reward\":{},\"next_obs\":{},\"done\":{}}}",
                t.episode,
                t.step,
                fmt_array(&t.obs),
                fmt_array(&t.action),
                fmt_num(t.reward),
                fmt_array(&t.next_obs),
                t.done
            )?;
        }
        Ok(())
    }

    /// Rebuilds a buffer from a [`dump`](Self::dump). Statistics are
    /// recomputed from the restored transitions.
    pub fn restore<R: BufRead>(
        input: R,
        capacity: usize,
        obs_dim: usize,
        action_dim: usize,
    ) -> Result<Self, ModelError> {
        let mut buf = Self::new(capacity, obs_dim, action_dim)?;
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| ModelError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let t: Transition = serde_json::from_str(&line)
                .map_err(|e| ModelError::Parse(format!("line {}: {e}", i + 1)))?;
            buf.push(t)?;
        }
        Ok(buf)
    }
}

/// `{:.16e}`: 17 significant digits, exact round trip.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_array(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| fmt_num(*x)).collect();
    format!("[{}]", parts.join(","))
}
