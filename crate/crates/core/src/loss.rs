//! Task losses and their weighted combinations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, norm, DenseVector};

/// Relative weights of the loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha_x: f64,
    pub alpha_t: f64,
    pub alpha_y: f64,
    pub alpha_z: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha_x: 20.0,
            alpha_t: 10.0,
            alpha_y: 80.0,
            alpha_z: 1.0,
        }
    }
}

impl LossWeights {
    pub fn new(alpha_x: f64, alpha_t: f64, alpha_y: f64, alpha_z: f64) -> Result<Self> {
        let w = LossWeights {
            alpha_x,
            alpha_t,
            alpha_y,
            alpha_z,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha_x, self.alpha_t, self.alpha_y, self.alpha_z];
        if all.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::InvalidInput("loss weights must be finite and non-negative".into()));
        }
        if all.iter().all(|&a| a == 0.0) {
            return Err(Error::InvalidInput("at least one loss weight must be positive".into()));
        }
        Ok(())
    }
}

/// Cosine distance `1 − a·b / (‖a‖‖b‖)` and its gradient in `pred`.
pub fn cosine_loss(pred: &[f64], gold: &[f64]) -> Result<(f64, DenseVector)> {
    if pred.len() != gold.len() {
        return Err(Error::dim("cosine loss", gold.len(), pred.len()));
    }
    let np = norm(pred);
    let ng = norm(gold);
    if np == 0.0 || ng == 0.0 {
        return Err(Error::InvalidInput("cosine loss of a zero vector is undefined".into()));
    }
    let cos = dot(pred, gold) / (np * ng);
    // ∂cos/∂p = g / (‖p‖‖g‖) − cos · p / ‖p‖²
    let grad = pred
        .iter()
        .zip(gold)
        .map(|(&p, &g)| -(g / (np * ng) - cos * p / (np * np)))
        .collect();
    Ok(((1.0 - cos).clamp(0.0, 2.0), DenseVector(grad)))
}

/// Cosine similarity; zero when either side is the zero vector.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let d = norm(a) * norm(b);
    if d == 0.0 {
        0.0
    } else {
        dot(a, b) / d
    }
}

pub const BCE_CLAMP: f64 = 1e-7;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_binary(pred_len: usize, gold: &[f64]) -> Result<()> {
    if pred_len != gold.len() {
        return Err(Error::dim("tag loss", gold.len(), pred_len));
    }
    if gold.is_empty() {
        return Err(Error::InvalidInput("tag loss needs at least one tag".into()));
    }
    if gold.iter().any(|&t| t != 0.0 && t != 1.0) {
        return Err(Error::InvalidInput("gold tags must be 0 or 1".into()));
    }
    Ok(())
}

/// Mean binary cross-entropy of activations in (0, 1), clamped to
/// `[1e-7, 1 − 1e-7]`. The gradient is with respect to the pre-sigmoid values.
pub fn bce_tag_loss(activations: &[f64], gold: &[f64]) -> Result<(f64, DenseVector)> {
    check_binary(activations.len(), gold)?;
    let n = gold.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(gold.len());
    for (&a, &t) in activations.iter().zip(gold) {
        let a = a.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        loss -= t * a.ln() + (1.0 - t) * (1.0 - a).ln();
        grad.push((a - t) / n);
    }
    Ok((loss / n, DenseVector(grad)))
}

/// Mean binary cross-entropy computed from pre-sigmoid values with the
/// stable `max(l,0) − l·t + log(1 + e^{−|l|})` form.
pub fn bce_with_logits(logits: &[f64], gold: &[f64]) -> Result<(f64, DenseVector)> {
    check_binary(logits.len(), gold)?;
    let n = gold.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(gold.len());
    for (&l, &t) in logits.iter().zip(gold) {
        loss += l.max(0.0) - l * t + (-l.abs()).exp().ln_1p();
        grad.push((sigmoid(l) - t) / n);
    }
    Ok((loss / n, DenseVector(grad)))
}

/// `α_x·L_lemma + α_t·L_t + α_y·L_y + α_z·L_z`.
pub fn composite_inflection_loss(lemma: f64, tags: f64, surface: f64, z: f64, w: &LossWeights) -> f64 {
    w.alpha_x * lemma + w.alpha_t * tags + w.alpha_y * surface + w.alpha_z * z
}

/// `α_x·L_x + α_y·L_y + α_z·L_z`, with `L_x` on the surface and `L_y` on the lemma.
pub fn composite_lemmatization_loss(surface_x: f64, lemma_y: f64, z: f64, w: &LossWeights) -> f64 {
    w.alpha_x * surface_x + w.alpha_y * lemma_y + w.alpha_z * z
}
