use crate::autodiff::Gradients;
use crate::error::{Error, Result};
use crate::layers::ParamStore;
use crate::tensor::Tensor;

use super::TrainConfig;

/// Adam moment estimates for every parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub first: Vec<Tensor>,
    pub second: Vec<Tensor>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        OptimizerState { first: zeros.clone(), second: zeros, step: 0 }
    }
}

/// One Adam update with bias correction. Every parameter must have a
/// gradient; nothing is modified if one is missing.
pub fn adam_step(params: &mut ParamStore, grads: &Gradients, state: &mut OptimizerState, cfg: &TrainConfig) -> Result<()> {
    if state.first.len() != params.len() {
        return Err(Error::invalid("adam_step", format!("state has {} slots for {} parameters", state.first.len(), params.len())));
    }
    let mut gs = Vec::with_capacity(params.len());
    for id in params.ids() {
        let g = grads.param(id).ok_or(Error::MissingGradient(id.0))?;
        if g.shape() != params.get(id).shape() {
            return Err(Error::shape("adam_step", format!("gradient {} for parameter {}", g.shape(), params.get(id).shape())));
        }
        gs.push(g);
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (i, w) in params.tensors_mut().iter_mut().enumerate() {
        let m = state.first[i].data_mut();
        let v = state.second[i].data_mut();
        for (((w, &g), m), v) in w.data_mut().iter_mut().zip(gs[i].data()).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            *w -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
