use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::normalizer::Affine;
use super::{EnsembleDynamics, ModelError, ReplayBuffer, RewardHead, TrainedNet};
use crate::numcore::{net_train_step, ForwardScratch, Sample};
use crate::rng::{derive_seed, Stream};

/// Schedule for one call to [`fit_models`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub epochs: usize,
    pub batch_size: usize,
    /// Fraction of the buffer held out for validation.
    pub holdout_fraction: f64,
    /// Stop each network after this many minibatch updates, even mid-epoch.
    pub max_updates: Option<usize>,
}

/// Outcome of a fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean NLL over each member's last epoch (or over the training split
    /// when `epochs == 0`).
    pub member_nll: Vec<f64>,
    pub reward_nll: f64,
    /// MSE of the ensemble-mean normalized delta on the held-out split,
    /// measured after training.
    pub validation_mse: f64,
    pub train_samples: usize,
    pub holdout_samples: usize,
}

/// Indices held out for validation: evenly spaced through the buffer.
fn holdout_mask(n: usize, fraction: f64) -> Vec<bool> {
    let mut mask = vec![false; n];
    if fraction <= 0.0 || n < 2 {
        return mask;
    }
    let k = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
    for j in 0..k {
        let i = ((2 * j + 1) * n) / (2 * k);
        mask[i.min(n - 1)] = true;
    }
    mask
}

struct Dataset {
    dynamics: Vec<Sample>,
    reward: Vec<Sample>,
}

fn build_datasets(
    model: &EnsembleDynamics,
    buffer: &ReplayBuffer,
    mask: &[bool],
    held_out: bool,
) -> Dataset {
    let obs_t = Affine::from(model.obs_stats());
    let delta_t = model.target_transform();
    let r_stats = buffer.reward_stats();
    let r_mean = r_stats.mean()[0];
    let r_inv = 1.0 / r_stats.scale()[0];
    let mut dynamics = Vec::new();
    let mut reward = Vec::new();
    for (t, &m) in buffer.iter().zip(mask) {
        if m != held_out {
            continue;
        }
        let norm = |o: &[f64]| -> Vec<f64> {
            o.iter()
                .enumerate()
                .map(|(j, v)| (v - obs_t.mean[j]) * obs_t.inv_scale[j])
                .collect()
        };
        let mut input = norm(&t.obs);
        input.extend_from_slice(&t.action);
        let target: Vec<f64> = t
            .next_obs
            .iter()
            .zip(&t.obs)
            .enumerate()
            .map(|(j, (n, o))| (n - o - delta_t.mean[j]) * delta_t.inv_scale[j])
            .collect();
        dynamics.push(Sample::unweighted(input, target));
        reward.push(Sample::unweighted(
            norm(&t.next_obs),
            vec![(t.reward - r_mean) * r_inv],
        ));
    }
    Dataset { dynamics, reward }
}

/// Trains `tn` for `epochs` passes (or until `max_updates`). Each pass draws
/// `data.len()` indices from the member's own stream; `bootstrap` samples
/// with replacement, otherwise a permutation. Returns the mean loss of the
/// last pass.
fn train_net(
    tn: &mut TrainedNet,
    data: &[Sample],
    opts: &FitOptions,
    seed: u64,
    bootstrap: bool,
    member: Option<usize>,
) -> Result<f64, ModelError> {
    let diverged = |source| ModelError::Divergence { member, source };
    if opts.epochs == 0 {
        return tn.net.loss(data).map_err(diverged);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = data.len();
    let batch = opts.batch_size.min(n).max(1);
    let mut last = 0.0;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut budget = opts.max_updates.unwrap_or(usize::MAX);
    for _ in 0..opts.epochs {
        if budget == 0 {
            break;
        }
        if bootstrap {
            for i in idx.iter_mut() {
                *i = rng.gen_range(0..n);
            }
        } else {
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                idx.swap(i, j);
            }
        }
        let (mut total, mut seen) = (0.0, 0);
        for chunk in idx.chunks(batch).take(budget) {
            let refs: Vec<&Sample> = chunk.iter().map(|&i| &data[i]).collect();
            let loss = net_train_step(&mut tn.net, &mut tn.opt, &refs).map_err(diverged)?;
            total += loss * chunk.len() as f64;
            seen += chunk.len();
            budget -= 1;
        }
        last = total / seen as f64;
    }
    Ok(last)
}

fn validation_mse(model: &EnsembleDynamics, data: &[Sample]) -> Result<f64, ModelError> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let d = model.obs_dim();
    let rows = data.len();
    let mut inputs = Vec::with_capacity(rows * data[0].input.len());
    for s in data {
        inputs.extend_from_slice(&s.input);
    }
    let mut avg = vec![0.0; rows * d];
    let mut scratch = ForwardScratch::default();
    let k = model.num_members() as f64;
    for member in model.members() {
        let y = member.net.forward_batch(&inputs, rows, &mut scratch)?;
        for r in 0..rows {
            for j in 0..d {
                avg[r * d + j] += y[r * 2 * d + j] / k;
            }
        }
    }
    let mut sse = 0.0;
    for (r, s) in data.iter().enumerate() {
        for j in 0..d {
            let e = avg[r * d + j] - s.target[j];
            sse += e * e;
        }
    }
    Ok(sse / (rows * d) as f64)
}

/// Fits every ensemble member and the reward head on `buffer`.
///
/// Normalization statistics are copied from the buffer first. Each member
/// trains on its own bootstrap resample drawn from a stream derived from
/// `seed` and the member's seed, so the result does not depend on the order
/// members are trained in. The held-out split is never trained on; when it
/// is empty the validation MSE is measured on the training split.
pub fn fit_models(
    model: &mut EnsembleDynamics,
    head: &mut RewardHead,
    buffer: &ReplayBuffer,
    opts: &FitOptions,
    seed: u64,
) -> Result<TrainReport, ModelError> {
    if buffer.obs_dim() != model.obs_dim()
        || buffer.action_dim() != model.action_dim()
        || head.obs_dim() != model.obs_dim()
    {
        return Err(ModelError::Dimension {
            what: "buffer",
            expected: model.obs_dim(),
            got: buffer.obs_dim(),
        });
    }
    let need = opts.batch_size.max(2);
    if buffer.len() < need {
        return Err(ModelError::InsufficientData {
            have: buffer.len(),
            need,
        });
    }
    model.set_stats(buffer.obs_stats().clone(), buffer.delta_stats().clone())?;
    head.set_stats(buffer.obs_stats().clone(), buffer.reward_stats().clone())?;

    let mask = holdout_mask(buffer.len(), opts.holdout_fraction);
    let train = build_datasets(model, buffer, &mask, false);
    let held = build_datasets(model, buffer, &mask, true);

    let mut member_nll = Vec::with_capacity(model.num_members());
    for (k, member) in model.members_mut().iter_mut().enumerate() {
        let s = derive_seed(seed ^ member.seed, Stream::Shuffle, k as u64);
        member_nll.push(train_net(member, &train.dynamics, opts, s, true, Some(k))?);
    }
    let reward_seed = derive_seed(seed ^ head.model().seed, Stream::Shuffle, u64::MAX);
    let reward_nll = train_net(head.model_mut(), &train.reward, opts, reward_seed, false, None)?;

    let val_data = if held.dynamics.is_empty() {
        &train.dynamics
    } else {
        &held.dynamics
    };
    let validation_mse = validation_mse(model, val_data)?;
    if !validation_mse.is_finite() {
        return Err(ModelError::NonFinite);
    }
    Ok(TrainReport {
        member_nll,
        reward_nll,
        validation_mse,
        train_samples: train.dynamics.len(),
        holdout_samples: held.dynamics.len(),
    })
}
