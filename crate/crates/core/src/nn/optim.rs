//! Adam with bias correction and global gradient-norm clipping.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global L2 norm above which gradients are rescaled; `None` disables.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, clip_norm: Some(5.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Norm before clipping.
    pub grad_norm: f64,
    /// Factor applied to the gradient (1 when not clipped).
    pub scale: f64,
}

pub fn optimizer_step<P: Parameters>(params: &mut P, grads: &P, state: &mut AdamState, cfg: &AdamConfig) -> Result<StepInfo> {
    if !(cfg.lr > 0.0) {
        return Err(Error::Config(format!("learning rate {} must be positive", cfg.lr)));
    }
    let g = grads.flatten();
    let n = params.param_count();
    if g.len() != n {
        return Err(Error::Shape(format!("{} gradients for {n} parameters", g.len())));
    }
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("gradient coordinate {i}")));
    }
    let grad_norm = libm::sqrt(g.iter().map(|v| v * v).sum());
    let scale = match cfg.clip_norm {
        Some(c) if grad_norm > c => c / grad_norm,
        _ => 1.0,
    };
    if state.m.len() != n {
        state.m = vec![0.0; n];
        state.v = vec![0.0; n];
        state.t = 0;
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - libm::pow(cfg.beta1, f64::from(t));
    let bc2 = 1.0 - libm::pow(cfg.beta2, f64::from(t));
    let (m, v) = (&mut state.m, &mut state.v);
    let mut at = 0;
    params.visit_mut(&mut |_, tensor| {
        for p in tensor.iter_mut() {
            let gi = g[at] * scale;
            m[at] = cfg.beta1 * m[at] + (1.0 - cfg.beta1) * gi;
            v[at] = cfg.beta2 * v[at] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = m[at] / bc1;
            let v_hat = v[at] / bc2;
            *p -= cfg.lr * m_hat / (libm::sqrt(v_hat) + cfg.eps);
            at += 1;
        }
    });
    Ok(StepInfo { grad_norm, scale })
}
