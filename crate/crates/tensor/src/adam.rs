//! Adam optimizer with bias correction.

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

/// Per-parameter Adam state. `t` increments by exactly one per step.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f32>,
    pub v: Vec<f32>,
    pub t: u64,
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl AdamState {
    pub fn new(numel: usize, lr: f32, beta1: f32, beta2: f32, eps: f32) -> AdamState {
        AdamState {
            m: vec![0.0; numel],
            v: vec![0.0; numel],
            t: 0,
            lr,
            beta1,
            beta2,
            eps,
        }
    }
}

/// One Adam update of `param` from `grad`, in place. Update math runs in f64.
pub fn adam_step(param: &Tensor, grad: &[f32], state: &mut AdamState) -> Result<()> {
    if grad.len() != param.numel() || state.m.len() != param.numel() {
        return Err(TensorError::ShapeMismatch {
            op: "adam_step",
            lhs: param.shape().to_vec(),
            rhs: vec![grad.len()],
        });
    }
    if !grad.iter().all(|g| g.is_finite()) {
        return Err(TensorError::NonFinite { op: "adam_step" });
    }
    state.t += 1;
    let (b1, b2) = (state.beta1 as f64, state.beta2 as f64);
    let corr1 = 1.0 - b1.powi(state.t as i32);
    let corr2 = 1.0 - b2.powi(state.t as i32);
    let lr = state.lr as f64;
    let eps = state.eps as f64;
    let mut data = param.to_vec();
    for i in 0..data.len() {
        let g = grad[i] as f64;
        let m = b1 * state.m[i] as f64 + (1.0 - b1) * g;
        let v = b2 * state.v[i] as f64 + (1.0 - b2) * g * g;
        state.m[i] = m as f32;
        state.v[i] = v as f32;
        let m_hat = m / corr1;
        let v_hat = v / corr2;
        data[i] = (data[i] as f64 - lr * m_hat / (v_hat.sqrt() + eps)) as f32;
    }
    param.set_data(&data)
}

/// Adam over a fixed set of parameters, reading their accumulated grads.
pub struct Adam {
    params: Vec<Tensor>,
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new(params: Vec<Tensor>, lr: f32, beta1: f32, beta2: f32, eps: f32) -> Adam {
        let states = params
            .iter()
            .map(|p| AdamState::new(p.numel(), lr, beta1, beta2, eps))
            .collect();
        Adam { params, states }
    }

    /// Updates every parameter that has a gradient. Parameters without one
    /// (unused in the last graph) are left alone.
    pub fn step(&mut self) -> Result<()> {
        for (p, s) in self.params.iter().zip(self.states.iter_mut()) {
            if let Some(g) = p.grad() {
                adam_step(p, &g, s)?;
            }
        }
        Ok(())
    }

    pub fn zero_grad(&self) {
        for p in &self.params {
            p.zero_grad();
        }
    }

    pub fn set_lr(&mut self, lr: f32) {
        for s in &mut self.states {
            s.lr = lr;
        }
    }
}
