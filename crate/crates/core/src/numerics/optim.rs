use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use crate::error::{Error, Result};

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPSILON: f64 = 1e-8;

    pub fn new<P: ParamSet + ?Sized>(params: &P, learning_rate: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        AdamState {
            learning_rate,
            beta1: Self::BETA1,
            beta2: Self::BETA2,
            epsilon: Self::EPSILON,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    /// One update of `params` from `grads`. Nothing is modified when a
    /// gradient is non-finite or the shapes disagree.
    pub fn step<P, G>(&mut self, params: &mut P, grads: &G) -> Result<()>
    where
        P: ParamSet + ?Sized,
        G: ParamSet + ?Sized,
    {
        let g = grads.tensors();
        if g.len() != self.first.len() {
            return Err(Error::dim("Adam tensor count", self.first.len(), g.len()));
        }
        for (i, (t, m)) in g.iter().zip(&self.first).enumerate() {
            if t.len() != m.len() {
                return Err(Error::dim("Adam tensor shape", m.len(), t.len()));
            }
            if t.iter().any(|v| !v.is_finite()) {
                let param = grads
                    .tensor_names()
                    .into_iter()
                    .nth(i)
                    .unwrap_or_else(|| format!("tensor{i}"));
                return Err(Error::NonFiniteGradient { param });
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let correction1 = 1.0 - self.beta1.powi(t);
        let correction2 = 1.0 - self.beta2.powi(t);
        let mut p = params.tensors_mut();
        if p.len() != g.len() {
            return Err(Error::dim("Adam parameter count", g.len(), p.len()));
        }
        for (((param, grad), m), v) in p
            .iter_mut()
            .zip(&g)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            for k in 0..grad.len() {
                let gk = grad[k];
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * gk;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * gk * gk;
                let m_hat = m[k] / correction1;
                let v_hat = v[k] / correction2;
                param[k] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}
