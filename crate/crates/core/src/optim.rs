use crate::backbone::Param;
use crate::error::{Error, Result};

/// SGD with classical momentum: `v ← μ·v + g`, `θ ← θ − η·v`.
#[derive(Clone, Debug)]
pub struct SgdMomentum {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: Vec<Vec<f64>>,
}

impl SgdMomentum {
    pub fn new(learning_rate: f64, momentum: f64) -> Result<Self> {
        if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
            return Err(Error::Parameter(format!(
                "learning rate must be finite and non-negative, got {learning_rate}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Parameter(format!(
                "momentum must lie in [0, 1), got {momentum}"
            )));
        }
        Ok(SgdMomentum {
            learning_rate,
            momentum,
            velocity: Vec::new(),
        })
    }

    /// Apply one update. `grads[i]` belongs to the i-th parameter yielded.
    pub fn step<'a>(&mut self, params: impl Iterator<Item = &'a mut Param>, grads: &[Vec<f64>]) {
        if self.velocity.is_empty() {
            self.velocity = grads.iter().map(|g| vec![0.0; g.len()]).collect();
        }
        let lr = self.learning_rate;
        for ((param, grad), vel) in params.zip(grads).zip(&mut self.velocity) {
            for (v, g) in vel.iter_mut().zip(grad) {
                *v = self.momentum * *v + g;
            }
            if lr == 0.0 {
                continue;
            }
            for (p, v) in param.value.values_mut().iter_mut().zip(vel.iter()) {
                *p -= lr * v;
            }
        }
    }
}
