use super::{info_gain_from_log_var, FeefBreakdown, PlanError, SequenceObjective};
use crate::worldmodel::{EnsembleBatch, EnsembleDynamics, ModelError, RewardBatch, RewardHead};

/// Batched per-member next-observation predictions.
pub trait MemberDynamics {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Fills `out.means` / `out.log_vars` (`[row][member][dim]`) and the
    /// `rows`, `members`, `dim` fields.
    fn predict_members(
        &self,
        states: &[f64],
        actions: &[f64],
        rows: usize,
        out: &mut EnsembleBatch,
    ) -> Result<(), ModelError>;
}

/// Batched expected reward on arrival at an observation.
pub trait RewardModel {
    fn predict_means(
        &self,
        states: &[f64],
        rows: usize,
        out: &mut RewardBatch,
    ) -> Result<(), ModelError>;

    /// `Some(r)` when every prediction equals `r` regardless of input.
    fn constant_mean(&self) -> Option<f64> {
        None
    }
}

impl MemberDynamics for EnsembleDynamics {
    fn obs_dim(&self) -> usize {
        EnsembleDynamics::obs_dim(self)
    }

    fn action_dim(&self) -> usize {
        EnsembleDynamics::action_dim(self)
    }

    fn predict_members(
        &self,
        states: &[f64],
        actions: &[f64],
        rows: usize,
        out: &mut EnsembleBatch,
    ) -> Result<(), ModelError> {
        self.predict_batch(states, actions, rows, out)
    }
}

impl RewardModel for RewardHead {
    fn predict_means(
        &self,
        states: &[f64],
        rows: usize,
        out: &mut RewardBatch,
    ) -> Result<(), ModelError> {
        self.predict_mean_batch(states, rows, out)
    }

    fn constant_mean(&self) -> Option<f64> {
        RewardHead::constant_mean(self)
    }
}

/// Imagined-rollout objective from a fixed start observation.
///
/// Each candidate keeps one state. At every step all members are queried at
/// `(state, a)`, the information gain of their beliefs is accumulated, the
/// state moves to the mixture mean and the reward head's mean at that state
/// is accumulated.
///
/// With `beta == 0` the information gain is not evaluated and reads as 0; if
/// the reward model is also constant no rollout is run at all.
pub struct FeefObjective<'a, D, R> {
    model: &'a D,
    head: &'a R,
    obs0: Vec<f64>,
    beta: f64,
    states: Vec<f64>,
    step_actions: Vec<f64>,
    alive: Vec<bool>,
    ig: Vec<f64>,
    ext: Vec<f64>,
    members: EnsembleBatch,
    rewards: RewardBatch,
}

impl<'a, D: MemberDynamics, R: RewardModel> FeefObjective<'a, D, R> {
    pub fn new(obs0: &[f64], model: &'a D, head: &'a R, beta: f64) -> Result<Self, PlanError> {
        if obs0.len() != model.obs_dim() {
            return Err(PlanError::Dimension {
                expected: model.obs_dim(),
                got: obs0.len(),
            });
        }
        if obs0.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite.into());
        }
        Ok(Self {
            model,
            head,
            obs0: obs0.to_vec(),
            beta,
            states: Vec::new(),
            step_actions: Vec::new(),
            alive: Vec::new(),
            ig: Vec::new(),
            ext: Vec::new(),
            members: EnsembleBatch::default(),
            rewards: RewardBatch::default(),
        })
    }
}

impl<D: MemberDynamics, R: RewardModel> SequenceObjective for FeefObjective<'_, D, R> {
    fn action_dim(&self) -> usize {
        self.model.action_dim()
    }

    fn score_batch(
        &mut self,
        seqs: &[f64],
        n: usize,
        horizon: usize,
        out: &mut Vec<FeefBreakdown>,
    ) -> Result<(), PlanError> {
        let d = self.model.obs_dim();
        let a = self.model.action_dim();
        if seqs.len() != n * horizon * a {
            return Err(PlanError::Dimension {
                expected: n * horizon * a,
                got: seqs.len(),
            });
        }
        if seqs.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(PlanError::ActionOutOfBounds);
        }
        self.states.clear();
        for _ in 0..n {
            self.states.extend_from_slice(&self.obs0);
        }
        self.alive.clear();
        self.alive.resize(n, true);
        self.ig.clear();
        self.ig.resize(n, 0.0);
        self.ext.clear();
        self.ext.resize(n, 0.0);
        if self.beta == 0.0 {
            if let Some(r) = self.head.constant_mean() {
                out.clear();
                out.extend(
                    (0..n).map(|_| FeefBreakdown::from_parts(r * horizon as f64, 0.0, 0.0, false)),
                );
                return Ok(());
            }
        }

        let mut next = vec![0.0; d];
        for t in 0..horizon {
            self.step_actions.clear();
            for c in 0..n {
                let base = (c * horizon + t) * a;
                self.step_actions.extend_from_slice(&seqs[base..base + a]);
            }
            self.model
                .predict_members(&self.states, &self.step_actions, n, &mut self.members)?;
            let k = self.members.members;
            if k == 0 {
                return Err(PlanError::EmptyEnsemble);
            }
            let mut step_gain = vec![0.0; n];
            for c in 0..n {
                if !self.alive[c] {
                    continue;
                }
                let means = self.members.row_means(c);
                let log_vars = self.members.row_log_vars(c);
                for (j, slot) in next.iter_mut().enumerate() {
                    *slot = (0..k).map(|m| means[m * d + j]).sum::<f64>() / k as f64;
                }
                let gain = if self.beta == 0.0 {
                    0.0
                } else {
                    info_gain_from_log_var(means, log_vars, k, d)
                };
                if !gain.is_finite() || next.iter().any(|v| !v.is_finite()) {
                    self.alive[c] = false;
                    continue;
                }
                step_gain[c] = gain;
                self.states[c * d..(c + 1) * d].copy_from_slice(&next);
            }
            self.head.predict_means(&self.states, n, &mut self.rewards)?;
            for c in 0..n {
                if !self.alive[c] {
                    continue;
                }
                let r = self.rewards.means[c];
                if !r.is_finite() {
                    self.alive[c] = false;
                    continue;
                }
                self.ig[c] += step_gain[c];
                self.ext[c] += r;
            }
        }
        out.clear();
        out.extend((0..n).map(|c| {
            FeefBreakdown::from_parts(self.ext[c], self.ig[c], self.beta, !self.alive[c])
        }));
        Ok(())
    }
}

/// Value of one action sequence (`horizon x action_dim`, row-major) from
/// `obs0`.
pub fn rollout_feef<D: MemberDynamics, R: RewardModel>(
    obs0: &[f64],
    actions: &[f64],
    model: &D,
    head: &R,
    beta: f64,
) -> Result<FeefBreakdown, PlanError> {
    let a = model.action_dim();
    if a == 0 || actions.len() % a != 0 {
        return Err(PlanError::Dimension {
            expected: a,
            got: actions.len(),
        });
    }
    let horizon = actions.len() / a;
    let mut objective = FeefObjective::new(obs0, model, head, beta)?;
    let mut out = Vec::with_capacity(1);
    objective.score_batch(actions, 1, horizon, &mut out)?;
    Ok(out[0])
}
