use serde::{Deserialize, Serialize};

use super::ModelParams;
use crate::error::{Error, Result};

/// Predictions are clamped to `[BCE_EPS, 1 - BCE_EPS]` before taking logs.
pub const BCE_EPS: f64 = 1e-7;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of a probability against a 0/1 label.
pub fn bce_loss(prediction: f64, label: bool) -> f64 {
    let p = prediction.clamp(BCE_EPS, 1.0 - BCE_EPS);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub init_stddev: f64,
    /// Scale each layer's init deviation by `sqrt(2 / fan_in)` instead of
    /// using `init_stddev` everywhere.
    pub fan_in_init: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            learning_rate: 0.01,
            momentum: 0.9,
            init_stddev: 0.01,
            fan_in_init: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.init_stddev > 0.0 && self.init_stddev.is_finite()) {
            return bad("init stddev must be positive");
        }
        Ok(())
    }
}

/// Anything exposing its parameters as a fixed list of flat tensors.
pub trait Tensors {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;
}

impl Tensors for ModelParams {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

/// Classical momentum: `v <- mu * v - lr * g; w <- w + v`.
#[derive(Debug, Clone, Default)]
pub struct Sgd {
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies one update with `gradients * grad_scale`. Rejects non-finite
    /// gradients before touching any parameter.
    pub fn step<P: Tensors>(
        &mut self,
        params: &mut P,
        gradients: &P,
        grad_scale: f64,
        learning_rate: f64,
        momentum: f64,
    ) -> Result<()> {
        let grads = gradients.tensors();
        if grads.iter().any(|g| g.iter().any(|x| !x.is_finite())) {
            return Err(Error::Divergence {
                epoch: 0,
                message: "non-finite gradient".into(),
            });
        }
        let mut tensors = params.tensors_mut();
        if tensors.len() != grads.len()
            || tensors.iter().zip(&grads).any(|(t, g)| t.len() != g.len())
        {
            return Err(Error::Internal(
                "gradient shapes do not match parameters".into(),
            ));
        }
        if self.velocity.is_empty() {
            self.velocity = grads.iter().map(|g| vec![0.0; g.len()]).collect();
        }
        for ((w, g), v) in tensors.iter_mut().zip(&grads).zip(&mut self.velocity) {
            for ((wi, gi), vi) in w.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
                *vi = momentum * *vi - learning_rate * grad_scale * gi;
                *wi += *vi;
            }
        }
        Ok(())
    }
}
