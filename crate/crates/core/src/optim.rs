//! SGD with decoupled-into-gradient weight decay, momentum, and cosine decay.
//!
//! The update is `buf = mu * buf + (grad + lambda * w); w -= alpha * buf`.
//! With `mu = 0` this is literally `w -= alpha * (grad + lambda * w)`, the
//! plain decayed step the two-phase training procedures are written in terms
//! of. Classical momentum is the default; Nesterov is available behind a
//! flag since either reading is defensible.

use alloc::format;

use crate::autodiff::{ParamId, ParamStore};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Learning rate alpha (> 0); also the cosine schedule's initial value.
    pub lr: f64,
    /// L2 coefficient lambda (>= 0) folded into the gradient.
    pub weight_decay: f64,
    /// Momentum mu in [0, 1). Zero disables the buffer entirely.
    pub momentum: f64,
    /// Nesterov lookahead instead of classical momentum.
    pub nesterov: bool,
}

impl OptimizerConfig {
    pub fn new(lr: f64, weight_decay: f64, momentum: f64) -> Result<Self> {
        let cfg = OptimizerConfig {
            lr,
            weight_decay,
            momentum,
            nesterov: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }
}

impl Default for OptimizerConfig {
    /// Adopted search values: lr 0.025, weight decay 1e-4, momentum 0.9.
    fn default() -> Self {
        OptimizerConfig {
            lr: 0.025,
            weight_decay: 1e-4,
            momentum: 0.9,
            nesterov: false,
        }
    }
}

/// One SGD update of a single parameter. Non-trainable parameters are left
/// untouched, including their momentum buffers.
pub fn sgd_step(store: &mut ParamStore, id: ParamId, lr: f64, cfg: &OptimizerConfig) {
    let p = store.get_mut(id);
    if !p.trainable {
        return;
    }
    debug_assert_eq!(p.grad.numel(), p.value.numel());
    let lambda = cfg.weight_decay;
    let mu = cfg.momentum;
    let nesterov = cfg.nesterov;
    let w = p.value.data_mut();
    let g = p.grad.data();
    let buf = p.momentum_buf.data_mut();
    for i in 0..w.len() {
        let gg = g[i] + lambda * w[i];
        let b = mu * buf[i] + gg;
        buf[i] = b;
        let step = if nesterov { gg + mu * b } else { b };
        w[i] -= lr * step;
    }
}

/// Applies [`sgd_step`] to every parameter in declaration order.
pub fn sgd_step_all(store: &mut ParamStore, lr: f64, cfg: &OptimizerConfig) {
    for i in 0..store.len() {
        sgd_step(store, ParamId(i), lr, cfg);
    }
}

/// Cosine decay from an initial rate down to zero over a fixed step budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LRSchedule {
    pub initial_lr: f64,
    pub total_steps: usize,
}

impl LRSchedule {
    pub fn new(initial_lr: f64, total_steps: usize) -> Result<Self> {
        if total_steps == 0 {
            return Err(Error::Config("schedule needs at least one step".into()));
        }
        Ok(LRSchedule {
            initial_lr,
            total_steps,
        })
    }

    /// `alpha(t) = alpha0 * (1 + cos(pi * t / T)) / 2`, clamped past `T`.
    pub fn lr_at(&self, step: usize) -> f64 {
        cosine_lr(step, self)
    }
}

pub fn cosine_lr(step: usize, schedule: &LRSchedule) -> f64 {
    if step >= schedule.total_steps {
        return 0.0;
    }
    let frac = step as f64 / schedule.total_steps as f64;
    schedule.initial_lr * 0.5 * (1.0 + libm::cos(core::f64::consts::PI * frac))
}
