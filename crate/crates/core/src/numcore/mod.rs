//! Feedforward network substrate: storage, batched forward pass, analytic
//! backpropagation, the adaptive-moment optimizer and a finite-difference
//! gradient checker.

mod gradcheck;
mod network;
mod optim;

pub use gradcheck::{finite_diff_check, gradcheck_random_nets, gradient_error, FD_STEP};
pub use network::{
    soft_clamp_log_var, soft_clamp_log_var_grad, ForwardScratch, Network, NetworkRecord,
    OutputKind, Sample, TensorRecord, LOG_VAR_MAX, LOG_VAR_MIN,
};
pub use optim::{net_train_step, OptimizerState};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("invalid layer sizes {0:?}")]
    InvalidLayout(Vec<usize>),
    #[error("{what} has length {got}, expected {expected}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("batch sample {index}: {what} has length {got}, expected {expected}")]
    SampleShape {
        index: usize,
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite loss at batch sample {index}")]
    NonFiniteLoss { index: usize },
    #[error("non-finite gradient at batch sample {index}")]
    NonFiniteGradient { index: usize },
    #[error("update would make parameter {0} non-finite")]
    NonFiniteParameter(usize),
    #[error("checkpoint is missing tensor {0}")]
    MissingTensor(String),
    #[error("tensor {name} has shape {got:?}, expected {expected:?}")]
    TensorShape {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
}

#[cfg(test)]
mod tests;
