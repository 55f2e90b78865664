//! AdamW with decoupled weight decay, and the cosine learning-rate schedule.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub first: Vec<Tensor>,
    pub second: Vec<Tensor>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &ParamStore, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor> = params.ids().map(|id| Tensor::zeros(params.get(id).shape())).collect();
        Self {
            config,
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }
}

/// One AdamW update at learning rate `lr`.
///
/// Weight decay multiplies parameters by `1 - lr·λ` before the Adam step
/// and never enters the moment estimates.
pub fn adamw_step(params: &mut ParamStore, grads: &[Tensor], state: &mut OptimizerState, lr: f64) -> Result<()> {
    if grads.len() != params.len() || state.first.len() != params.len() {
        return Err(shape_err("adamw_step", "parameter, gradient and moment counts differ"));
    }
    for (id, g) in params.ids().zip(grads) {
        if params.get(id).shape() != g.shape() || state.first[id.0].shape() != g.shape() {
            return Err(shape_err("adamw_step", alloc::format!("shape mismatch for {}", params.name(id))));
        }
    }
    state.step += 1;
    let AdamConfig {
        beta1,
        beta2,
        eps,
        weight_decay,
    } = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - libm::pow(beta1, t as f64);
    let bc2 = 1.0 - libm::pow(beta2, t as f64);
    for (id, g) in params.ids().zip(grads) {
        let m = state.first[id.0].data_mut();
        let v = state.second[id.0].data_mut();
        let theta = params.get_mut(id).data_mut();
        for i in 0..theta.len() {
            let gi = g.data()[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
            v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            theta[i] -= lr * weight_decay * theta[i];
            theta[i] -= lr * m_hat / (libm::sqrt(v_hat) + eps);
        }
    }
    Ok(())
}

/// Cosine decay from `max` to `min` over the first half of `total` steps,
/// then constant at `min`.
pub fn cosine_lr(step: usize, total: usize, max: f64, min: f64) -> Result<f64> {
    if total == 0 {
        return Err(Error::InvalidArgument("schedule needs at least one step".into()));
    }
    if step > total {
        return Err(Error::InvalidArgument(alloc::format!("step {step} beyond schedule length {total}")));
    }
    let half = total as f64 / 2.0;
    if step == 0 {
        return Ok(max);
    }
    if step as f64 >= half {
        return Ok(min);
    }
    let progress = step as f64 / half;
    Ok(min + (max - min) * (1.0 + libm::cos(core::f64::consts::PI * progress)) / 2.0)
}
