//! Parameter update rules: adaptive-moment (default) and plain SGD.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(Error::InvalidArgument(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 2e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators plus the step counter.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl OptimizerState {
    pub fn new(n_params: usize) -> Self {
        Self { m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }
}

/// One optimizer step in place. Adam uses bias-corrected moments; SGD is the
/// bare `p -= lr * g` rule.
pub fn sgd_adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut OptimizerState,
    cfg: &OptimizerConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::DimensionMismatch { expected: params.len(), got: grads.len() });
    }
    match cfg.kind {
        OptimizerKind::Sgd => {
            for (p, &g) in params.iter_mut().zip(grads) {
                *p -= cfg.learning_rate * g;
            }
        }
        OptimizerKind::Adam => {
            state.t += 1;
            let bc1 = 1.0 - cfg.beta1.powi(state.t as i32);
            let bc2 = 1.0 - cfg.beta2.powi(state.t as i32);
            for i in 0..params.len() {
                let g = grads[i];
                state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
                state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
                let m_hat = state.m[i] / bc1;
                let v_hat = state.v[i] / bc2;
                params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
    }
    Ok(())
}
