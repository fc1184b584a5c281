use super::{Parameter, Tensor};
use crate::error::{Error, Result};

/// First/second moment estimates for one parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Tensor,
    pub v: Tensor,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(shape: &[usize]) -> Self {
        AdamState {
            m: Tensor::zeros(shape),
            v: Tensor::zeros(shape),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of `param` from its accumulated gradient.
pub fn adam_step(param: &mut Parameter, state: &mut AdamState, lr: f64) -> Result<()> {
    if state.m.shape() != param.shape() || state.v.shape() != param.shape() {
        return Err(Error::shape(format!(
            "adam state {:?} does not match parameter {:?}",
            state.m.shape(),
            param.shape()
        )));
    }
    if !param.grad.is_finite() {
        return Err(Error::Training {
            epoch: 0,
            reason: "non-finite gradient".into(),
        });
    }
    state.t += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let values = param.value.data_mut();
    let grads = param.grad.data();
    let m = state.m.data_mut();
    let v = state.v.data_mut();
    for i in 0..values.len() {
        let g = grads[i];
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Adam over an ordered list of parameters.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new(lr: f64, params: &[&mut Parameter]) -> Self {
        Adam {
            lr,
            states: params.iter().map(|p| AdamState::new(p.shape())).collect(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut Parameter]) -> Result<()> {
        if params.len() != self.states.len() {
            return Err(Error::shape(format!(
                "optimizer tracks {} parameters, got {}",
                self.states.len(),
                params.len()
            )));
        }
        for (p, s) in params.iter_mut().zip(&mut self.states) {
            adam_step(p, s, self.lr)?;
        }
        Ok(())
    }
}

/// Learning rate interpolated linearly from `lr_start` (first step) to
/// `lr_end` (last step).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearDecay {
    pub lr_start: f64,
    pub lr_end: f64,
    pub total_steps: usize,
}

impl LinearDecay {
    pub fn lr_at(&self, step: usize) -> f64 {
        if self.total_steps <= 1 {
            return self.lr_start;
        }
        let frac = step.min(self.total_steps - 1) as f64 / (self.total_steps - 1) as f64;
        self.lr_start * (1.0 - frac) + self.lr_end * frac
    }
}

/// Plain SGD step with a linearly decayed learning rate; returns the rate used.
pub fn sgd_linear_decay_step(
    param: &mut [f64],
    grad: &[f64],
    step: usize,
    total_steps: usize,
    lr_start: f64,
    lr_end: f64,
) -> f64 {
    let lr = LinearDecay {
        lr_start,
        lr_end,
        total_steps,
    }
    .lr_at(step);
    param.iter_mut().zip(grad).for_each(|(p, g)| *p -= lr * g);
    lr
}
