use std::borrow::Borrow;

use serde::{Deserialize, Serialize};

use super::{NetError, Network, Sample};

/// Adaptive-moment optimizer state for one parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl OptimizerState {
    /// Defaults: lr 1e-3, decays 0.9 / 0.999, epsilon 1e-8.
    pub fn new(num_params: usize) -> Self {
        Self::with_learning_rate(num_params, 1e-3)
    }

    pub fn with_learning_rate(num_params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
        }
    }

    pub fn for_network(net: &Network, learning_rate: f64) -> Self {
        Self::with_learning_rate(net.num_params(), learning_rate)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn num_params(&self) -> usize {
        self.first_moment.len()
    }

    /// Applies one update to `params`. Nothing is mutated when the update
    /// would produce a non-finite parameter.
    pub fn apply(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NetError> {
        let n = self.first_moment.len();
        if params.len() != n || grads.len() != n {
            return Err(NetError::Shape {
                what: "optimizer parameters",
                expected: n,
                got: params.len().min(grads.len()),
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(NetError::NonFiniteParameter(i));
        }
        let t = (self.step + 1) as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let mut m = self.first_moment.clone();
        let mut v = self.second_moment.clone();
        let mut next = params.to_vec();
        for i in 0..n {
            let g = grads[i];
            m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
            v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            next[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            if !next[i].is_finite() {
                return Err(NetError::NonFiniteParameter(i));
            }
        }
        params.copy_from_slice(&next);
        self.first_moment = m;
        self.second_moment = v;
        self.step += 1;
        Ok(())
    }
}

/// One optimizer step on `batch`. Returns the mean weighted loss measured
/// before the update.
pub fn net_train_step<S: Borrow<Sample>>(
    net: &mut Network,
    opt: &mut OptimizerState,
    batch: &[S],
) -> Result<f64, NetError> {
    if opt.num_params() != net.num_params() {
        return Err(NetError::Shape {
            what: "optimizer state",
            expected: net.num_params(),
            got: opt.num_params(),
        });
    }
    let (loss, grad) = net.loss_and_gradient(batch)?;
    opt.apply(net.params_mut(), &grad)?;
    Ok(loss)
}
