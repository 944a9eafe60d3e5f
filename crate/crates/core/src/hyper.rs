use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training and evaluation hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Propagation layers `K`.
    pub layers: usize,
    /// InfoNCE temperature.
    pub tau: f64,
    pub lambda_cl: f64,
    pub lambda_reg: f64,
    pub dim: usize,
    pub lr: f64,
    pub train_batch: usize,
    pub eval_batch: usize,
    /// Upper bound on training epochs.
    pub epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        default_hyperparams()
    }
}

/// Published fixed settings, with grid midpoints for the tuned ones.
pub fn default_hyperparams() -> Hyperparams {
    Hyperparams {
        layers: 2,
        tau: 0.5,
        lambda_cl: 0.2,
        lambda_reg: 1e-4,
        dim: 64,
        lr: 1e-3,
        train_batch: 2048,
        eval_batch: 4096,
        epochs: 200,
        patience: 10,
        seed: 0,
    }
}

/// Tuning grids for the temperature, contrastive weight and layer count.
pub const TAU_GRID: [f64; 3] = [0.3, 0.5, 0.7];
pub const LAMBDA_CL_GRID: [f64; 4] = [0.1, 0.2, 0.3, 0.5];
pub const LAYER_GRID: [usize; 3] = [1, 2, 3];

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidHyperparam {
                name,
                reason: reason.into(),
            })
        };
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau", "must be positive and finite");
        }
        if !(self.lambda_cl >= 0.0 && self.lambda_cl.is_finite()) {
            return bad("lambda_cl", "must be non-negative");
        }
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return bad("lambda_reg", "must be non-negative");
        }
        if self.dim == 0 {
            return bad("dim", "must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr", "must be positive");
        }
        if self.train_batch == 0 {
            return bad("train_batch", "must be at least 1");
        }
        if self.eval_batch == 0 {
            return bad("eval_batch", "must be at least 1");
        }
        Ok(())
    }
}
