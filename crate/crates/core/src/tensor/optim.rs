//! Adam and momentum SGD over flat parameter buffers, plus learning-rate schedules.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// A parameter tensor and its gradient, as seen by an optimizer.
pub struct ParamMut<'a, T> {
    pub name: String,
    pub value: &'a mut [T],
    pub grad: &'a [T],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    SgdMomentum { momentum: f64 },
}

#[derive(Clone, Debug)]
struct Slot<T> {
    name: String,
    first: Vec<T>,
    second: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct OptimizerState<T> {
    kind: OptimizerKind,
    step: u64,
    lr: f64,
    slots: Vec<Slot<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(kind: OptimizerKind, lr: f64) -> Result<Self> {
        check_lr(lr)?;
        Ok(Self {
            kind,
            step: 0,
            lr,
            slots: Vec::new(),
        })
    }

    pub fn adam(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Result<Self> {
        Self::new(OptimizerKind::Adam { beta1, beta2, eps }, lr)
    }

    pub fn sgd_momentum(lr: f64, momentum: f64) -> Result<Self> {
        Self::new(OptimizerKind::SgdMomentum { momentum }, lr)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn set_lr(&mut self, lr: f64) -> Result<()> {
        check_lr(lr)?;
        self.lr = lr;
        Ok(())
    }

    /// Applies one update. All gradients are checked before any parameter is
    /// touched, so a non-finite gradient leaves the parameters unchanged.
    pub fn step(&mut self, params: &mut [ParamMut<'_, T>]) -> Result<()> {
        for p in params.iter() {
            if p.value.len() != p.grad.len() {
                return Err(Error::shape(
                    "optimizer_step",
                    format!("gradient of length {} for {}", p.value.len(), p.name),
                    p.grad.len(),
                ));
            }
            if p.grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of {}", p.name)));
            }
        }
        if self.slots.is_empty() {
            self.slots = params
                .iter()
                .map(|p| Slot {
                    name: p.name.clone(),
                    first: vec![T::zero(); p.value.len()],
                    second: match self.kind {
                        OptimizerKind::Adam { .. } => vec![T::zero(); p.value.len()],
                        OptimizerKind::SgdMomentum { .. } => Vec::new(),
                    },
                })
                .collect();
        } else if self.slots.len() != params.len()
            || self
                .slots
                .iter()
                .zip(params.iter())
                .any(|(s, p)| s.name != p.name || s.first.len() != p.value.len())
        {
            return Err(Error::shape(
                "optimizer_step",
                "parameters congruent with optimizer state",
                "a different parameter set",
            ));
        }

        self.step += 1;
        let lr = T::lit(self.lr);
        match self.kind {
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.step as i32;
                let b1 = T::lit(beta1);
                let b2 = T::lit(beta2);
                let eps = T::lit(eps);
                let c1 = T::one() - b1.powi(t);
                let c2 = T::one() - b2.powi(t);
                for (slot, p) in self.slots.iter_mut().zip(params.iter_mut()) {
                    for i in 0..p.value.len() {
                        let g = p.grad[i];
                        let m = b1 * slot.first[i] + (T::one() - b1) * g;
                        let v = b2 * slot.second[i] + (T::one() - b2) * g * g;
                        slot.first[i] = m;
                        slot.second[i] = v;
                        let m_hat = m / c1;
                        let v_hat = v / c2;
                        p.value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
            OptimizerKind::SgdMomentum { momentum } => {
                let mu = T::lit(momentum);
                for (slot, p) in self.slots.iter_mut().zip(params.iter_mut()) {
                    for i in 0..p.value.len() {
                        let v = mu * slot.first[i] + p.grad[i];
                        slot.first[i] = v;
                        p.value[i] -= lr * v;
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_lr(lr: f64) -> Result<()> {
    if lr.is_finite() && lr > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("learning rate must be positive, got {lr}")))
    }
}

/// Multiplicative per-epoch decay: `base * decay^epoch`.
pub fn decayed_lr(base: f64, decay: f64, epoch: usize) -> f64 {
    base * decay.powi(epoch as i32)
}

/// Half-cosine annealing from `base` at step 0 towards 0 at `total_steps`.
pub fn cosine_lr(base: f64, step: usize, total_steps: usize) -> f64 {
    if total_steps == 0 {
        return base;
    }
    let t = (step.min(total_steps)) as f64 / total_steps as f64;
    base * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
}
