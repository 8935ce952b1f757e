//! Plain SGD with optional momentum and weight decay (both off by default).

use alloc::vec;
use alloc::vec::Vec;

use crate::mlp::{Gradient, ModelParams};
use crate::{Error, Result};

/// `params -= lr * grad`, elementwise.
pub fn sgd_step(params: &mut ModelParams, grad: &Gradient, lr: f64) -> Result<()> {
    check(params, grad)?;
    for (p, g) in params.values_mut().iter_mut().zip(grad.values()) {
        *p -= lr * g;
    }
    Ok(())
}

fn check(params: &ModelParams, grad: &Gradient) -> Result<()> {
    if !params.same_shape(grad.layer_sizes()) {
        return Err(Error::config("gradient shape does not match parameters"));
    }
    if !grad.is_finite() {
        return Err(Error::numeric("non-finite gradient"));
    }
    Ok(())
}

/// SGD hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    /// Learning rate `eta`.
    pub lr: f64,
    /// Heavy-ball momentum coefficient; 0 disables.
    pub momentum: f64,
    /// L2 weight decay coefficient; 0 disables.
    pub weight_decay: f64,
}

impl SgdConfig {
    /// Plain SGD at learning rate `lr`.
    pub fn plain(lr: f64) -> Self {
        Self {
            lr,
            momentum: 0.0,
            weight_decay: 0.0,
        }
    }
}

/// Stateful SGD. With momentum and weight decay at zero every step is
/// exactly [`sgd_step`].
#[derive(Debug, Clone)]
pub struct Sgd {
    config: SgdConfig,
    velocity: Vec<f64>,
}

impl Sgd {
    /// A fresh optimizer with zero velocity.
    pub fn new(config: SgdConfig) -> Self {
        Self {
            config,
            velocity: Vec::new(),
        }
    }

    /// Applies one update.
    pub fn step(&mut self, params: &mut ModelParams, grad: &Gradient) -> Result<()> {
        let SgdConfig {
            lr,
            momentum,
            weight_decay,
        } = self.config;
        if momentum == 0.0 && weight_decay == 0.0 {
            return sgd_step(params, grad, lr);
        }
        check(params, grad)?;
        if self.velocity.len() != params.len() {
            self.velocity = vec![0.0; params.len()];
        }
        for ((p, g), v) in params
            .values_mut()
            .iter_mut()
            .zip(grad.values())
            .zip(&mut self.velocity)
        {
            let d = g + weight_decay * *p;
            *v = momentum * *v + d;
            *p -= lr * *v;
        }
        Ok(())
    }
}
