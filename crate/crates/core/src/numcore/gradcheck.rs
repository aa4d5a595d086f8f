use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{NetError, Network, OutputKind, Sample};

/// Central-difference step used by the gradient checker.
pub const FD_STEP: f64 = 1e-5;

/// Maximum relative error between the analytic loss gradient and central
/// differences, over every parameter.
///
/// Uses the network's own loss on the single sample `(input, target)` with
/// unit weights. Shape errors surface as `f64::INFINITY`.
pub fn finite_diff_check(net: &Network, input: &[f64], target: &[f64]) -> f64 {
    let sample = [Sample::unweighted(input.to_vec(), target.to_vec())];
    match net.loss_and_gradient(&sample) {
        Ok((_, grad)) => gradient_error(net, input, target, &grad),
        Err(_) => f64::INFINITY,
    }
}

/// Compares a caller-supplied gradient against central differences of the
/// network loss. `|a - n| / max(|a|, |n|, 1e-8)`, maximized over parameters.
pub fn gradient_error(net: &Network, input: &[f64], target: &[f64], analytic: &[f64]) -> f64 {
    if analytic.len() != net.num_params() {
        return f64::INFINITY;
    }
    let sample = [Sample::unweighted(input.to_vec(), target.to_vec())];
    let mut probe = net.clone();
    let base = net.params().to_vec();
    let mut worst: f64 = 0.0;
    let mut params = base.clone();
    for i in 0..base.len() {
        params[i] = base[i] + FD_STEP;
        probe.params_mut().copy_from_slice(&params);
        let plus = probe.loss(&sample);
        params[i] = base[i] - FD_STEP;
        probe.params_mut().copy_from_slice(&params);
        let minus = probe.loss(&sample);
        params[i] = base[i];
        let (Ok(plus), Ok(minus)) = (plus, minus) else {
            return f64::INFINITY;
        };
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    worst
}

/// Worst [`finite_diff_check`] error over `count` random networks: one to
/// three hidden layers of width 2..=10, input 1..=6, alternating linear and
/// Gaussian heads, inputs and targets uniform in [-1, 1].
pub fn gradcheck_random_nets(count: usize, seed: u64) -> Result<f64, NetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for i in 0..count {
        let kind = if i % 2 == 0 {
            OutputKind::Linear
        } else {
            OutputKind::Gaussian
        };
        let target_dim = rng.gen_range(1..=3);
        let mut sizes = vec![rng.gen_range(1..=6)];
        for _ in 0..rng.gen_range(1..=3) {
            sizes.push(rng.gen_range(2..=10));
        }
        sizes.push(match kind {
            OutputKind::Linear => target_dim,
            OutputKind::Gaussian => 2 * target_dim,
        });
        let net = Network::new(&sizes, kind, &mut rng)?;
        let input: Vec<f64> = (0..sizes[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let target: Vec<f64> = (0..target_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        worst = worst.max(finite_diff_check(&net, &input, &target));
    }
    Ok(worst)
}
