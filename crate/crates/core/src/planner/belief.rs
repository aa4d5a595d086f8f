use serde::{Deserialize, Serialize};

use super::PlanError;

const LN_2PI_E: f64 = 2.837_877_066_409_345_3;

/// Diagonal Gaussian prediction from one ensemble member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl GaussianBelief {
    pub fn new(mean: Vec<f64>, variance: Vec<f64>) -> Result<Self, PlanError> {
        if mean.len() != variance.len() {
            return Err(PlanError::Dimension {
                expected: mean.len(),
                got: variance.len(),
            });
        }
        if variance.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(PlanError::InvalidVariance);
        }
        Ok(Self { mean, variance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Differential entropy in nats.
    pub fn entropy(&self) -> f64 {
        self.variance.iter().map(|v| 0.5 * (LN_2PI_E + v.ln())).sum()
    }
}

/// Moment-matched diagonal Gaussian of an equally weighted mixture: mean of
/// the member means; per-dimension variance is the mean member variance plus
/// the (population) variance of the member means.
pub fn moment_match(beliefs: &[GaussianBelief]) -> Result<GaussianBelief, PlanError> {
    let first = beliefs.first().ok_or(PlanError::EmptyEnsemble)?;
    let d = first.dim();
    if let Some(b) = beliefs.iter().find(|b| b.dim() != d) {
        return Err(PlanError::Dimension {
            expected: d,
            got: b.dim(),
        });
    }
    let k = beliefs.len() as f64;
    let mut mean = vec![0.0; d];
    let mut variance = vec![0.0; d];
    for j in 0..d {
        let mu = beliefs.iter().map(|b| b.mean[j]).sum::<f64>() / k;
        let spread = beliefs
            .iter()
            .map(|b| (b.mean[j] - mu) * (b.mean[j] - mu))
            .sum::<f64>()
            / k;
        let avg_var = beliefs.iter().map(|b| b.variance[j]).sum::<f64>() / k;
        mean[j] = mu;
        variance[j] = avg_var + spread;
    }
    Ok(GaussianBelief { mean, variance })
}

/// State information gain of an ensemble prediction: entropy of the
/// moment-matched mixture minus the mean member entropy, floored at zero.
pub fn info_gain(beliefs: &[GaussianBelief]) -> Result<f64, PlanError> {
    let matched = moment_match(beliefs)?;
    let mean_member =
        beliefs.iter().map(GaussianBelief::entropy).sum::<f64>() / beliefs.len() as f64;
    Ok((matched.entropy() - mean_member).max(0.0))
}

/// Information gain from member means and log-variances laid out as
/// `k` contiguous blocks of `d` values. Used on the planner hot path.
pub(crate) fn info_gain_from_log_var(means: &[f64], log_vars: &[f64], k: usize, d: usize) -> f64 {
    let kf = k as f64;
    let mut gain = 0.0;
    for j in 0..d {
        let mut mu = 0.0;
        let mut avg_var = 0.0;
        let mut avg_lv = 0.0;
        for m in 0..k {
            mu += means[m * d + j];
            let lv = log_vars[m * d + j];
            avg_var += lv.exp();
            avg_lv += lv;
        }
        mu /= kf;
        avg_var /= kf;
        avg_lv /= kf;
        let mut spread = 0.0;
        for m in 0..k {
            let e = means[m * d + j] - mu;
            spread += e * e;
        }
        gain += 0.5 * ((avg_var + spread / kf).ln() - avg_lv);
    }
    gain.max(0.0)
}
