//! Minimal double-precision numeric substrate: dense tensors, parameters,
//! activations, losses, optimizers, dropout and finite-difference gradient
//! verification.

mod activation;
mod dense;
mod dropout;
mod gradcheck;
mod loss;
mod optim;
mod tensor;

pub use activation::{relu, relu_grad, sigmoid, sigmoid_scalar, tanh, tanh_grad_from_output};
pub use dense::{dense_forward, Dense};
pub use dropout::{dropout, dropout_mask};
pub use gradcheck::{grad_check, DenseBceObjective, Differentiable, GradCheckReport};
pub use loss::{bce_loss, mse_loss, BCE_EPSILON};
pub use optim::{adam_step, sgd_linear_decay_step, Adam, AdamState, LinearDecay};
pub use tensor::{gemm, Parameter, Tensor};

/// Glorot/Xavier uniform bound for a matrix with the given fan-in and fan-out.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
