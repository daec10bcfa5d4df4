use alloc::vec;
use alloc::vec::Vec;

use crate::error::{dim_err, Error, Result};
use crate::model::ModelParams;

/// Adam moments for every parameter tensor, in canonical parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl OptimState {
    pub fn new(params: &ModelParams) -> Self {
        let sizes: Vec<usize> = params.tensors.named().iter().map(|(_, t)| t.numel()).collect();
        Self {
            beta1: 0.9,
            beta2: 0.99,
            eps: 1e-8,
            step: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One bias-corrected Adam update with learning rate `lr`.
///
/// `grads` follows the canonical parameter order. Nothing is modified if any
/// gradient entry is non-finite.
pub fn adam_step(params: &mut ModelParams, grads: &[Vec<f64>], state: &mut OptimState, lr: f64) -> Result<()> {
    let mut named = params.tensors.named_mut();
    if grads.len() != named.len() || state.m.len() != named.len() {
        return Err(dim_err!("{} gradients for {} parameters", grads.len(), named.len()));
    }
    for ((name, t), g) in named.iter().zip(grads) {
        if g.len() != t.numel() {
            return Err(dim_err!("{name}: gradient length {} for {} values", g.len(), t.numel()));
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(alloc::format!("gradient of {name}[{i}] is {}", g[i])));
        }
    }
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let bc1 = 1.0 - libm::pow(b1, state.step as f64);
    let bc2 = 1.0 - libm::pow(b2, state.step as f64);
    for (k, (_, t)) in named.iter_mut().enumerate() {
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for (i, x) in t.data_mut().iter_mut().enumerate() {
            let g = grads[k][i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            *x -= lr * m_hat / (libm::sqrt(v_hat) + state.eps);
        }
    }
    Ok(())
}
