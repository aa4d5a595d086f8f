use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{FeefBreakdown, PlanError, PlannerConfig, SequenceObjective};

/// Independent Gaussian over a `horizon x action_dim` action sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSequenceDistribution {
    pub horizon: usize,
    pub action_dim: usize,
    /// Row-major `[step][action]`, within `[-1, 1]`.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ActionSequenceDistribution {
    pub fn new(horizon: usize, action_dim: usize, init_std: f64) -> Self {
        Self {
            horizon,
            action_dim,
            mean: vec![0.0; horizon * action_dim],
            std: vec![init_std; horizon * action_dim],
        }
    }

    /// Starts from `previous` advanced by one step, padding the tail with
    /// zeros.
    pub fn shifted(previous: &[f64], horizon: usize, action_dim: usize, init_std: f64) -> Self {
        let mut dist = Self::new(horizon, action_dim, init_std);
        let keep = previous.len().saturating_sub(action_dim).min(dist.mean.len());
        for (dst, src) in dist.mean[..keep]
            .iter_mut()
            .zip(&previous[action_dim..action_dim + keep])
        {
            *dst = src.clamp(-1.0, 1.0);
        }
        dist
    }

    pub fn first_action(&self) -> &[f64] {
        &self.mean[..self.action_dim]
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        for (m, s) in self.mean.iter().zip(&self.std) {
            let z: f64 = rng.sample(StandardNormal);
            out.push((m + s * z).clamp(-1.0, 1.0));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    /// Score of the weakest elite.
    pub elite_threshold: f64,
    /// Best score seen so far (including this iteration).
    pub best_total: f64,
}

/// Per-decision diagnostics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanTrace {
    pub iterations: Vec<IterationTrace>,
    pub best: FeefBreakdown,
}

impl PlanTrace {
    /// One-line JSON record.
    pub fn to_record(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanResult {
    pub action: Vec<f64>,
    /// Breakdown of the best sequence found (of the initial mean when no
    /// iterations ran).
    pub best: FeefBreakdown,
    pub best_sequence: Vec<f64>,
    pub distribution: ActionSequenceDistribution,
    pub trace: PlanTrace,
}

fn rank_key(b: &FeefBreakdown) -> f64 {
    if b.total.is_nan() {
        f64::NEG_INFINITY
    } else {
        b.total
    }
}

/// Cross-entropy search over action sequences.
///
/// Each iteration samples `population` sequences, ranks them together with
/// the best sequence found so far, and refits the distribution to the top
/// `elites` with smoothing. Returns the first action of the final mean.
pub fn cem_plan<O, R>(
    objective: &mut O,
    cfg: &PlannerConfig,
    warm_mean: Option<&[f64]>,
    rng: &mut R,
) -> Result<PlanResult, PlanError>
where
    O: SequenceObjective + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let a = objective.action_dim();
    let h = cfg.horizon;
    let len = h * a;
    let mut dist = match warm_mean {
        Some(prev) => {
            if prev.len() != len {
                return Err(PlanError::Dimension {
                    expected: len,
                    got: prev.len(),
                });
            }
            ActionSequenceDistribution::shifted(prev, h, a, cfg.init_std)
        }
        None => ActionSequenceDistribution::new(h, a, cfg.init_std),
    };

    let mut scores = Vec::with_capacity(cfg.population);
    let mut trace = PlanTrace::default();

    if cfg.iterations == 0 {
        objective.score_batch(&dist.mean, 1, h, &mut scores)?;
        trace.best = scores[0];
        return Ok(PlanResult {
            action: dist.first_action().to_vec(),
            best: scores[0],
            best_sequence: dist.mean.clone(),
            distribution: dist,
            trace,
        });
    }

    let n = cfg.population;
    let mut seqs = Vec::with_capacity(n * len);
    let mut best: Option<(FeefBreakdown, Vec<f64>)> = None;
    let mut order: Vec<usize> = Vec::with_capacity(n + 1);
    let mut elite_mean = vec![0.0; len];
    let mut elite_var = vec![0.0; len];

    for it in 0..cfg.iterations {
        seqs.clear();
        for _ in 0..n {
            dist.sample_into(rng, &mut seqs);
        }
        objective.score_batch(&seqs, n, h, &mut scores)?;
        // The retained best sequence takes index n.
        if let Some((b, s)) = &best {
            seqs.extend_from_slice(s);
            scores.push(*b);
        }
        let pool = scores.len();
        order.clear();
        order.extend(0..pool);
        order.sort_by(|&i, &j| {
            rank_key(&scores[j])
                .partial_cmp(&rank_key(&scores[i]))
                .unwrap()
                .then(i.cmp(&j))
        });
        let top = order[0];
        let improved = match &best {
            None => true,
            Some((b, _)) => rank_key(&scores[top]) > rank_key(b),
        };
        if improved {
            best = Some((scores[top], seqs[top * len..(top + 1) * len].to_vec()));
        }

        let e = cfg.elites;
        elite_mean.iter_mut().for_each(|v| *v = 0.0);
        elite_var.iter_mut().for_each(|v| *v = 0.0);
        for &i in &order[..e] {
            for (m, x) in elite_mean.iter_mut().zip(&seqs[i * len..(i + 1) * len]) {
                *m += x;
            }
        }
        elite_mean.iter_mut().for_each(|m| *m /= e as f64);
        for &i in &order[..e] {
            for ((v, m), x) in elite_var
                .iter_mut()
                .zip(&elite_mean)
                .zip(&seqs[i * len..(i + 1) * len])
            {
                *v += (x - m) * (x - m);
            }
        }
        let alpha = cfg.smoothing;
        for j in 0..len {
            let std = (elite_var[j] / e as f64).sqrt();
            dist.mean[j] = (alpha * dist.mean[j] + (1.0 - alpha) * elite_mean[j]).clamp(-1.0, 1.0);
            dist.std[j] = (alpha * dist.std[j] + (1.0 - alpha) * std).max(cfg.std_floor);
        }

        let best_total = best.as_ref().map(|(b, _)| b.total).unwrap_or(f64::NAN);
        trace.iterations.push(IterationTrace {
            iteration: it,
            elite_threshold: scores[order[e - 1]].total,
            best_total,
        });
    }

    let (best_fb, best_seq) = best.expect("at least one iteration ran");
    trace.best = best_fb;
    Ok(PlanResult {
        action: dist.first_action().to_vec(),
        best: best_fb,
        best_sequence: best_seq,
        distribution: dist,
        trace,
    })
}
