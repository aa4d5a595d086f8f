use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::normalizer::Affine;
use super::{ModelConfig, ModelError, Normalizer};
use crate::numcore::{soft_clamp_log_var, ForwardScratch, Network, OptimizerState, OutputKind};
use crate::planner::GaussianBelief;
use crate::rng::{derive_seed, Stream};

/// A network together with its optimizer state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedNet {
    pub net: Network,
    pub opt: OptimizerState,
    /// Seed of this network's private data-shuffling stream.
    pub seed: u64,
}

impl TrainedNet {
    fn new(sizes: &[usize], learning_rate: f64, seed: u64) -> Result<Self, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Network::new(sizes, OutputKind::Gaussian, &mut rng)?;
        let opt = OptimizerState::for_network(&net, learning_rate);
        Ok(Self { net, opt, seed })
    }
}

fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(hidden.len() + 2);
    sizes.push(input);
    sizes.extend_from_slice(hidden);
    sizes.push(output);
    sizes
}

/// Per-member predictions for a batch of `(state, action)` rows.
///
/// `means` and `log_vars` are laid out `[row][member][dim]` and are in
/// observation units (deltas already added back onto the input state).
#[derive(Clone, Debug, Default)]
pub struct EnsembleBatch {
    pub rows: usize,
    pub members: usize,
    pub dim: usize,
    pub means: Vec<f64>,
    pub log_vars: Vec<f64>,
    inputs: Vec<f64>,
    fwd: ForwardScratch,
}

impl EnsembleBatch {
    pub fn row_means(&self, r: usize) -> &[f64] {
        let s = self.members * self.dim;
        &self.means[r * s..(r + 1) * s]
    }

    pub fn row_log_vars(&self, r: usize) -> &[f64] {
        let s = self.members * self.dim;
        &self.log_vars[r * s..(r + 1) * s]
    }
}

/// K-member probabilistic ensemble predicting observation deltas.
///
/// Members see `(normalized obs, action)` and emit a normalized delta mean and
/// log-variance per observation dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDynamics {
    obs_dim: usize,
    action_dim: usize,
    members: Vec<TrainedNet>,
    obs_stats: Normalizer,
    delta_stats: Normalizer,
}

impl EnsembleDynamics {
    pub fn new(
        obs_dim: usize,
        action_dim: usize,
        cfg: &ModelConfig,
        seed: u64,
    ) -> Result<Self, ModelError> {
        cfg.validate()?;
        let sizes = layer_sizes(obs_dim + action_dim, &cfg.hidden, 2 * obs_dim);
        let members = (0..cfg.ensemble_size)
            .map(|k| {
                TrainedNet::new(
                    &sizes,
                    cfg.learning_rate,
                    derive_seed(seed, Stream::MemberInit, k as u64),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            obs_dim,
            action_dim,
            members,
            obs_stats: Normalizer::new(obs_dim),
            delta_stats: Normalizer::new(obs_dim),
        })
    }

    /// Builds an ensemble from explicit member networks (used for hand-made
    /// models). Every network must map `obs + action` inputs to `2 * obs`
    /// Gaussian outputs.
    pub fn from_networks(
        obs_dim: usize,
        action_dim: usize,
        nets: Vec<Network>,
    ) -> Result<Self, ModelError> {
        if nets.len() < 2 {
            return Err(ModelError::InvalidConfig(
                "an ensemble needs at least two members".into(),
            ));
        }
        for n in &nets {
            if n.input_dim() != obs_dim + action_dim
                || n.output_dim() != 2 * obs_dim
                || n.output_kind() != OutputKind::Gaussian
            {
                return Err(ModelError::Dimension {
                    what: "member network",
                    expected: obs_dim + action_dim,
                    got: n.input_dim(),
                });
            }
        }
        let members = nets
            .into_iter()
            .enumerate()
            .map(|(k, net)| TrainedNet {
                opt: OptimizerState::for_network(&net, 1e-3),
                net,
                seed: k as u64,
            })
            .collect();
        Ok(Self {
            obs_dim,
            action_dim,
            members,
            obs_stats: Normalizer::new(obs_dim),
            delta_stats: Normalizer::new(obs_dim),
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn num_members(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[TrainedNet] {
        &self.members
    }

    pub(crate) fn members_mut(&mut self) -> &mut [TrainedNet] {
        &mut self.members
    }

    pub fn obs_stats(&self) -> &Normalizer {
        &self.obs_stats
    }

    pub fn delta_stats(&self) -> &Normalizer {
        &self.delta_stats
    }

    /// Installs the normalization statistics used for inputs and outputs.
    pub fn set_stats(&mut self, obs: Normalizer, delta: Normalizer) -> Result<(), ModelError> {
        if obs.dim() != self.obs_dim || delta.dim() != self.obs_dim {
            return Err(ModelError::Dimension {
                what: "normalizer",
                expected: self.obs_dim,
                got: obs.dim(),
            });
        }
        self.obs_stats = obs;
        self.delta_stats = delta;
        Ok(())
    }

    /// Member outputs are standardized deltas.
    pub(crate) fn target_transform(&self) -> Affine {
        Affine::from(&self.delta_stats)
    }

    /// Normalized member input for one `(obs, action)` pair.
    pub fn member_input(&self, obs: &[f64], action: &[f64]) -> Vec<f64> {
        let mut x = self.obs_stats.normalize(obs);
        x.extend_from_slice(action);
        x
    }

    /// One Gaussian belief over the next observation per member, in member
    /// order.
    pub fn predict(&self, obs: &[f64], action: &[f64]) -> Result<Vec<GaussianBelief>, ModelError> {
        let mut batch = EnsembleBatch::default();
        self.predict_batch(obs, action, 1, &mut batch)?;
        let (k, d) = (self.members.len(), self.obs_dim);
        Ok((0..k)
            .map(|m| GaussianBelief {
                mean: batch.means[m * d..(m + 1) * d].to_vec(),
                variance: batch.log_vars[m * d..(m + 1) * d]
                    .iter()
                    .map(|lv| lv.exp())
                    .collect(),
            })
            .collect())
    }

    /// Batched prediction for `rows` states and actions (row-major).
    pub fn predict_batch(
        &self,
        states: &[f64],
        actions: &[f64],
        rows: usize,
        out: &mut EnsembleBatch,
    ) -> Result<(), ModelError> {
        let (d, a, k) = (self.obs_dim, self.action_dim, self.members.len());
        if states.len() != rows * d {
            return Err(ModelError::Dimension {
                what: "observation",
                expected: d,
                got: if rows == 0 { 0 } else { states.len() / rows },
            });
        }
        if actions.len() != rows * a {
            return Err(ModelError::Dimension {
                what: "action",
                expected: a,
                got: if rows == 0 { 0 } else { actions.len() / rows },
            });
        }
        if !self.obs_stats.is_ready() || !self.delta_stats.is_ready() {
            return Err(ModelError::NormalizerNotReady);
        }
        let obs_t = Affine::from(&self.obs_stats);
        let delta_t = self.target_transform();

        out.inputs.clear();
        out.inputs.reserve(rows * (d + a));
        for r in 0..rows {
            let s = &states[r * d..(r + 1) * d];
            for j in 0..d {
                out.inputs.push((s[j] - obs_t.mean[j]) * obs_t.inv_scale[j]);
            }
            out.inputs.extend_from_slice(&actions[r * a..(r + 1) * a]);
        }
        out.rows = rows;
        out.members = k;
        out.dim = d;
        out.means.resize(rows * k * d, 0.0);
        out.log_vars.resize(rows * k * d, 0.0);
        for (m, member) in self.members.iter().enumerate() {
            let y = member.net.forward_batch(&out.inputs, rows, &mut out.fwd)?;
            for r in 0..rows {
                let yr = &y[r * 2 * d..(r + 1) * 2 * d];
                let s = &states[r * d..(r + 1) * d];
                let base = (r * k + m) * d;
                for j in 0..d {
                    out.means[base + j] = s[j] + delta_t.mean[j] + yr[j] * delta_t.scale[j];
                    out.log_vars[base + j] =
                        soft_clamp_log_var(yr[d + j]) + 2.0 * delta_t.ln_scale[j];
                }
            }
        }
        Ok(())
    }
}

/// Reward predictor conditioned on the observation alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardHead {
    obs_dim: usize,
    model: TrainedNet,
    obs_stats: Normalizer,
    reward_stats: Normalizer,
}

/// Scratch space for batched reward predictions.
#[derive(Clone, Debug, Default)]
pub struct RewardBatch {
    pub means: Vec<f64>,
    inputs: Vec<f64>,
    fwd: ForwardScratch,
}

impl RewardHead {
    pub fn new(obs_dim: usize, cfg: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        let sizes = layer_sizes(obs_dim, &cfg.hidden, 2);
        let model = TrainedNet::new(
            &sizes,
            cfg.learning_rate,
            derive_seed(seed, Stream::MemberInit, u64::MAX),
        )?;
        Ok(Self {
            obs_dim,
            model,
            obs_stats: Normalizer::new(obs_dim),
            reward_stats: Normalizer::new(1),
        })
    }

    /// Wraps an explicit `obs -> (mean, raw log-variance)` network.
    pub fn from_network(obs_dim: usize, net: Network) -> Result<Self, ModelError> {
        if net.input_dim() != obs_dim || net.output_dim() != 2 || net.output_kind() != OutputKind::Gaussian {
            return Err(ModelError::Dimension {
                what: "reward network",
                expected: obs_dim,
                got: net.input_dim(),
            });
        }
        Ok(Self {
            obs_dim,
            model: TrainedNet {
                opt: OptimizerState::for_network(&net, 1e-3),
                net,
                seed: 0,
            },
            obs_stats: Normalizer::new(obs_dim),
            reward_stats: Normalizer::new(1),
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn model(&self) -> &TrainedNet {
        &self.model
    }

    pub(crate) fn model_mut(&mut self) -> &mut TrainedNet {
        &mut self.model
    }

    pub fn obs_stats(&self) -> &Normalizer {
        &self.obs_stats
    }

    pub fn reward_stats(&self) -> &Normalizer {
        &self.reward_stats
    }

    pub fn set_stats(&mut self, obs: Normalizer, reward: Normalizer) -> Result<(), ModelError> {
        if obs.dim() != self.obs_dim || reward.dim() != 1 {
            return Err(ModelError::Dimension {
                what: "normalizer",
                expected: self.obs_dim,
                got: obs.dim(),
            });
        }
        self.obs_stats = obs;
        self.reward_stats = reward;
        Ok(())
    }

    /// The reward every prediction returns when all rewards seen so far were
    /// identical.
    pub fn constant_mean(&self) -> Option<f64> {
        (self.reward_stats.is_ready() && self.reward_stats.is_degenerate())
            .then(|| self.reward_stats.mean()[0])
    }

    /// Gaussian belief over the reward received on arriving at `obs`.
    ///
    /// When every reward seen so far was identical the mean is that constant.
    pub fn predict(&self, obs: &[f64]) -> Result<GaussianBelief, ModelError> {
        if obs.len() != self.obs_dim {
            return Err(ModelError::Dimension {
                what: "observation",
                expected: self.obs_dim,
                got: obs.len(),
            });
        }
        if !self.obs_stats.is_ready() || !self.reward_stats.is_ready() {
            return Err(ModelError::NormalizerNotReady);
        }
        let x = self.obs_stats.normalize(obs);
        let y = self.model.net.forward(&x)?;
        let scale = self.reward_stats.scale()[0];
        let mean = if self.reward_stats.is_degenerate() {
            self.reward_stats.mean()[0]
        } else {
            self.reward_stats.mean()[0] + y[0] * scale
        };
        let variance = soft_clamp_log_var(y[1]).exp() * scale * scale;
        Ok(GaussianBelief {
            mean: vec![mean],
            variance: vec![variance],
        })
    }

    /// Predicted mean reward for each of `rows` observations.
    pub fn predict_mean_batch(
        &self,
        states: &[f64],
        rows: usize,
        out: &mut RewardBatch,
    ) -> Result<(), ModelError> {
        let d = self.obs_dim;
        if states.len() != rows * d {
            return Err(ModelError::Dimension {
                what: "observation",
                expected: d,
                got: if rows == 0 { 0 } else { states.len() / rows },
            });
        }
        if !self.obs_stats.is_ready() || !self.reward_stats.is_ready() {
            return Err(ModelError::NormalizerNotReady);
        }
        let r_mean = self.reward_stats.mean()[0];
        out.means.clear();
        if self.reward_stats.is_degenerate() {
            out.means.resize(rows, r_mean);
            return Ok(());
        }
        let obs_t = Affine::from(&self.obs_stats);
        let r_scale = self.reward_stats.scale()[0];
        out.inputs.clear();
        out.inputs.reserve(rows * d);
        for r in 0..rows {
            for j in 0..d {
                out.inputs
                    .push((states[r * d + j] - obs_t.mean[j]) * obs_t.inv_scale[j]);
            }
        }
        let y = self.model.net.forward_batch(&out.inputs, rows, &mut out.fwd)?;
        out.means
            .extend((0..rows).map(|r| r_mean + y[r * 2] * r_scale));
        Ok(())
    }
}
