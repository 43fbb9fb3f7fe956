//! L1 training with Adam on random aligned patches.

mod curve;
mod data;
mod optim;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use curve::{render_curve_png, window_mean, write_curve_csv};
pub use data::{sample_batch, synthetic_image, synthetic_pairs, ImagePair};
pub use optim::{adam_step, OptimizerState};

use crate::autodiff::{Graph, Tape};
use crate::error::{Error, Result};
use crate::network::Model;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch: usize,
    /// LR patch side in pixels.
    pub patch: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub steps: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { batch: 4, patch: 48, lr: 6e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8, steps: 500, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.batch == 0 {
            return bad("batch must be at least 1".into());
        }
        if self.patch % 2 != 0 || self.patch < crate::network::MIN_INPUT_SIZE {
            return bad(format!("patch must be even and at least {}, got {}", crate::network::MIN_INPUT_SIZE, self.patch));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad(format!("betas must lie in [0, 1), got ({}, {})", self.beta1, self.beta2));
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if self.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        Ok(())
    }
}

/// Mean absolute difference.
pub fn l1_loss(sr: &Tensor, hr: &Tensor) -> Result<f64> {
    if sr.shape() != hr.shape() {
        return Err(Error::shape("l1_loss", format!("{} vs {}", sr.shape(), hr.shape())));
    }
    Ok(sr.data().iter().zip(hr.data()).map(|(a, b)| (a - b).abs()).sum::<f64>() / sr.len() as f64)
}

/// Loss and gradient norm of one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub step: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

/// Runs `cfg.steps` Adam steps on `model`, returning the per-step loss.
/// `on_step` sees every step's statistics as they are produced.
pub fn train_toy(
    model: &mut Model,
    pairs: &[ImagePair],
    cfg: &TrainConfig,
    mut on_step: impl FnMut(&StepStats),
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if let Some(p) = pairs.iter().find(|p| p.scale != model.config().scale) {
        return Err(Error::Data(format!("{}: pair scale {} but model scale {}", p.name, p.scale, model.config().scale)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = OptimizerState::new(model.params());
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let (lr, hr) = sample_batch(pairs, cfg, &mut rng)?;
        let diverged = |loss: f64, grad_norm: f64| Error::Diverged { step, loss, grad_norm };
        let mut tape = Tape::new();
        let x = tape.input(lr);
        let target = tape.input(hr);
        let (loss_var, loss) = match model.forward_graph(&mut tape, &x).and_then(|y| tape.l1_loss(y, target)) {
            Ok(v) => (v, tape.value(v).value()?),
            Err(e) if e.is_numeric() => return Err(diverged(f64::NAN, f64::NAN)),
            Err(e) => return Err(e),
        };
        if !loss.is_finite() {
            return Err(diverged(loss, f64::NAN));
        }
        let grads = match tape.backward(loss_var) {
            Ok(g) => g,
            Err(e) if e.is_numeric() => return Err(diverged(loss, f64::NAN)),
            Err(e) => return Err(e),
        };
        let grad_norm = grads.global_norm();
        if !grad_norm.is_finite() {
            return Err(diverged(loss, grad_norm));
        }
        adam_step(model.params_mut(), &grads, &mut state, cfg)?;
        losses.push(loss);
        on_step(&StepStats { step, loss, grad_norm });
    }
    Ok(losses)
}
