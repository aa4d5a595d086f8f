use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::run::{plan_step, planner_seed, random_action};
use super::{Checkpoint, EpisodeTally, HarnessError};
use crate::envs::{Env, EnvConfig};
use crate::rng::{derive_seed, Stream};

/// Aggregate over evaluation episodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: usize,
    /// Set when no episode was requested; the means are then 0.
    pub zero_episodes: bool,
    pub mean_return: f64,
    pub success_rate: f64,
    /// Mean over episodes of the per-step mean |shear| (screw task only).
    pub mean_abs_shear: Option<f64>,
    pub returns: Vec<f64>,
    pub successes: Vec<bool>,
}

impl EvalSummary {
    fn from_tallies(tallies: &[EpisodeTally], env: &EnvConfig) -> Self {
        let n = tallies.len();
        let mean = |f: &dyn Fn(&EpisodeTally) -> f64| {
            if n == 0 {
                0.0
            } else {
                tallies.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let successes: Vec<bool> = tallies.iter().map(|t| t.success(env)).collect();
        Self {
            episodes: n,
            zero_episodes: n == 0,
            mean_return: mean(&|t| t.ret),
            success_rate: mean(&|t| f64::from(u8::from(t.success(env)))),
            mean_abs_shear: (env.task == crate::envs::Task::Screw)
                .then(|| mean(&|t| t.mean_abs_shear())),
            returns: tallies.iter().map(|t| t.ret).collect(),
            successes,
        }
    }
}

/// Model-free reference policies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixedPolicy {
    /// Uniform random actions.
    Random,
    /// Scripted policy with access to the true state.
    Oracle,
}

fn episode_seed(seed: u64, ep: usize) -> u64 {
    derive_seed(seed, Stream::Env, ep as u64)
}

/// Runs the checkpoint's planner with frozen models; nothing is stored or
/// fitted.
pub fn eval_checkpoint(
    ck: &Checkpoint,
    env_cfg: &EnvConfig,
    episodes: usize,
    seed: u64,
) -> Result<EvalSummary, HarnessError> {
    let mut env = Env::new(env_cfg).map_err(|e| HarnessError::Config(e.to_string()))?;
    let env_dims = (env.obs_dim(), env.action_dim());
    if (ck.obs_dim(), ck.action_dim()) != env_dims {
        return Err(HarnessError::DimensionMismatch {
            checkpoint: (ck.obs_dim(), ck.action_dim()),
            env: env_dims,
        });
    }
    let planner = &ck.config.planner;
    let beta = ck.config.effective_beta();
    let mut tallies = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        let mut obs = env.reset(episode_seed(seed, ep))?.obs;
        let mut tally = EpisodeTally::default();
        let mut warm: Option<Vec<f64>> = None;
        let mut step = 0;
        loop {
            let plan_seed = planner_seed(seed, planner.seed, ep, step);
            let res = plan_step(&ck.model, &ck.head, planner, beta, &obs, warm.as_deref(), plan_seed)?;
            if planner.warm_start {
                warm = Some(res.distribution.mean.clone());
            }
            let out = env.step(&res.action)?;
            tally.add(out.reward, &out.info);
            obs = out.obs;
            step += 1;
            if out.done {
                break;
            }
        }
        tallies.push(tally);
    }
    Ok(EvalSummary::from_tallies(&tallies, env_cfg))
}

/// Evaluates a reference policy on the same episode seeds as
/// [`eval_checkpoint`].
pub fn eval_policy(
    policy: FixedPolicy,
    env_cfg: &EnvConfig,
    episodes: usize,
    seed: u64,
) -> Result<EvalSummary, HarnessError> {
    let mut env = Env::new(env_cfg).map_err(|e| HarnessError::Config(e.to_string()))?;
    let a_dim = env.action_dim();
    let mut tallies = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        env.reset(episode_seed(seed, ep))?;
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(seed, Stream::RandomPolicy, ep as u64));
        let mut tally = EpisodeTally::default();
        loop {
            let action = match policy {
                FixedPolicy::Random => random_action(&mut rng, a_dim),
                FixedPolicy::Oracle => env.oracle_action()?,
            };
            let out = env.step(&action)?;
            tally.add(out.reward, &out.info);
            if out.done {
                break;
            }
        }
        tallies.push(tally);
    }
    Ok(EvalSummary::from_tallies(&tallies, env_cfg))
}
