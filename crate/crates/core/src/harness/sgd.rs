use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub dampening: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            momentum: 0.9,
            dampening: 0.1,
        }
    }
}

/// `v <- momentum * v + (1 - dampening) * g; p <- p - lr * v`, elementwise.
pub fn sgd_update(p: &mut [f64], g: &[f64], v: &mut [f64], cfg: &SgdConfig) {
    for ((p, &g), v) in p.iter_mut().zip(g).zip(v.iter_mut()) {
        *v = cfg.momentum * *v + (1.0 - cfg.dampening) * g;
        *p -= cfg.lr * *v;
    }
}

/// One velocity tensor per parameter tensor, same order and shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub velocity: Vec<Tensor>,
}

impl OptimState {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            velocity: params
                .named_tensors()
                .iter()
                .map(|(_, t)| Tensor::zeros(t.rows(), t.cols()))
                .collect(),
        }
    }
}

/// Applies one update to every parameter tensor, the log-temperature included.
/// `grads` follows [`ModelParams::named_tensors`] order.
pub fn sgd_step(
    params: &mut ModelParams,
    grads: &[Tensor],
    state: &mut OptimState,
    cfg: &SgdConfig,
    step: usize,
) -> Result<()> {
    let names: Vec<&'static str> = params.named_tensors().iter().map(|(n, _)| *n).collect();
    let mut tensors = params.tensors_mut();
    if grads.len() != tensors.len() || state.velocity.len() != tensors.len() {
        return Err(Error::Contract(format!(
            "{} parameters, {} gradients, {} velocities",
            tensors.len(),
            grads.len(),
            state.velocity.len()
        )));
    }
    for ((name, p), (g, v)) in names
        .iter()
        .zip(&tensors)
        .zip(grads.iter().zip(&state.velocity))
    {
        if p.shape() != g.shape() || p.shape() != v.shape() {
            return Err(Error::Shape {
                op: "sgd_step",
                lhs: p.shape(),
                rhs: g.shape(),
            });
        }
        if !g.is_finite() {
            return Err(Error::Divergence {
                step,
                param: name.to_string(),
            });
        }
    }
    for (p, (g, v)) in tensors
        .iter_mut()
        .zip(grads.iter().zip(state.velocity.iter_mut()))
    {
        sgd_update(p.data_mut(), g.data(), v.data_mut(), cfg);
    }
    Ok(())
}
