//! Adagrad with a multiplicative accumulator decay.

use serde::{Deserialize, Serialize};

use crate::error::{EcatError, Result};
use crate::numerics::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdagradConfig {
    pub learning_rate: f64,
    /// Multiplier applied to the accumulator before adding `g^2`; `(0, 1]`.
    pub accumulator_decay: f64,
    pub epsilon: f64,
    pub initial_accumulator: f64,
}

impl Default for AdagradConfig {
    fn default() -> Self {
        AdagradConfig { learning_rate: 0.01, accumulator_decay: 0.9999, epsilon: 1e-8, initial_accumulator: 0.0 }
    }
}

impl AdagradConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(EcatError::Config(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if !(self.accumulator_decay > 0.0 && self.accumulator_decay <= 1.0) {
            return Err(EcatError::Config(format!(
                "accumulator_decay must be in (0, 1], got {}",
                self.accumulator_decay
            )));
        }
        if !(self.epsilon > 0.0) || self.initial_accumulator < 0.0 {
            return Err(EcatError::Config("epsilon must be > 0 and initial_accumulator >= 0".into()));
        }
        Ok(())
    }
}

/// Per-parameter accumulators for one optimizer instance.
#[derive(Clone, Debug)]
pub struct AdagradState {
    pub config: AdagradConfig,
    accumulators: Vec<Tensor>,
}

impl AdagradState {
    pub fn new(config: AdagradConfig) -> Self {
        AdagradState { config, accumulators: Vec::new() }
    }

    pub fn accumulators(&self) -> &[Tensor] {
        &self.accumulators
    }

    /// Apply one update. `grads[i]` belongs to `params[i]`; `None` means the
    /// parameter received no gradient this step (treated as zero).
    ///
    /// `acc <- decay * acc + g^2`, `theta <- theta - lr * g / (sqrt(acc) + eps)`.
    pub fn step<N: AsRef<str>>(&mut self, params: &mut [(N, &mut Tensor)], grads: &[Option<&Tensor>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(EcatError::Dimension(format!(
                "adagrad: {} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for ((name, p), g) in params.iter().zip(grads) {
            let name = name.as_ref();
            if let Some(g) = g {
                if g.shape() != p.shape() {
                    return Err(EcatError::Dimension(format!(
                        "adagrad: gradient {:?} for parameter {name} of shape {:?}",
                        g.shape(),
                        p.shape()
                    )));
                }
                if let Some(pos) = g.data().iter().position(|v| !v.is_finite()) {
                    return Err(EcatError::Diverged(format!(
                        "non-finite gradient {} for parameter {name} at offset {pos}",
                        g.data()[pos]
                    )));
                }
            }
        }
        if self.accumulators.is_empty() {
            self.accumulators =
                params.iter().map(|(_, p)| Tensor::full(p.shape(), self.config.initial_accumulator)).collect();
        } else if self.accumulators.len() != params.len() {
            return Err(EcatError::Dimension("adagrad: parameter list changed between steps".into()));
        }
        let AdagradConfig { learning_rate: lr, accumulator_decay: decay, epsilon: eps, .. } = self.config;
        for (((_, p), g), acc) in params.iter_mut().zip(grads).zip(&mut self.accumulators) {
            match g {
                Some(g) => {
                    for ((theta, a), &gv) in p.data_mut().iter_mut().zip(acc.data_mut()).zip(g.data()) {
                        *a = decay * *a + gv * gv;
                        *theta -= lr * gv / (a.sqrt() + eps);
                    }
                }
                None if decay != 1.0 => acc.data_mut().iter_mut().for_each(|a| *a *= decay),
                None => {}
            }
        }
        Ok(())
    }
}
