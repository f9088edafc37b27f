use super::{Gradients, MlpModel};
use crate::error::{Error, Result};

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(model: &mut MlpModel, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let shapes: Vec<usize> = model.parameters_mut().iter().map(|p| p.len()).collect();
        AdamState {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One bias-corrected Adam update; `step_index` counts from 1.
pub fn adam_step(model: &mut MlpModel, grads: &Gradients, state: &mut AdamState, step_index: u64) -> Result<()> {
    if step_index == 0 {
        return Err(Error::invalid("Adam step index starts at 1"));
    }
    let (b1, b2, eps, lr) = (state.beta1, state.beta2, state.epsilon, state.learning_rate);
    let correction1 = 1.0 - b1.powf(step_index as f64);
    let correction2 = 1.0 - b2.powf(step_index as f64);
    let params = model.parameters_mut();
    let grads = grads.tensors();
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::invalid("gradient layout does not match the model"));
    }
    for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        if p.len() != g.len() || p.len() != m.len() {
            return Err(Error::invalid("gradient tensor size does not match the model"));
        }
        for k in 0..p.len() {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            let m_hat = m[k] / correction1;
            let v_hat = v[k] / correction2;
            p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
