//! Categorical latent variables: Gumbel-Softmax sampling, hardening to
//! one-hot and the KL regulariser towards a uniform prior.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseVector;

/// Geometry of the latent block: `d` independent categorical variables with
/// `cat` categories each, sampled at temperature `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentSpec {
    pub d: usize,
    pub cat: usize,
    pub tau: f64,
}

impl LatentSpec {
    pub fn new(d: usize, cat: usize, tau: f64) -> Result<Self> {
        let spec = LatentSpec { d, cat, tau };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(Error::InvalidInput("latent dimension must be at least 1".into()));
        }
        if self.cat < 2 {
            return Err(Error::InvalidInput("latent variables need at least 2 categories".into()));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidInput(format!("temperature must be positive, got {}", self.tau)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.d * self.cat
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn with_tau(self, tau: f64) -> Self {
        LatentSpec { tau, ..self }
    }

    fn check_len(&self, v: &[f64], context: &'static str) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::dim(context, self.len(), v.len()));
        }
        Ok(())
    }
}

const UNIFORM_CLAMP: f64 = 1e-12;

/// Standard Gumbel draw `−log(−log U)` with `U` kept away from 0 and 1.
pub fn gumbel_noise<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random::<f64>().clamp(UNIFORM_CLAMP, 1.0 - UNIFORM_CLAMP);
    -(-u.ln()).ln()
}

/// Numerically stable softmax of `logits / tau` written into `out`.
fn softmax_into(logits: &[f64], tau: f64, out: &mut [f64]) {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = ((l - max) / tau).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Per-block softmax at temperature `tau`.
pub fn block_softmax(logits: &[f64], spec: &LatentSpec, tau: f64) -> Result<DenseVector> {
    spec.check_len(logits, "latent logits")?;
    let mut out = vec![0.0; logits.len()];
    for (l, o) in logits.chunks_exact(spec.cat).zip(out.chunks_exact_mut(spec.cat)) {
        softmax_into(l, tau, o);
    }
    Ok(DenseVector(out))
}

/// Draw the standard Gumbel noise for one sample of the whole latent block.
pub fn draw_noise<R: Rng + ?Sized>(spec: &LatentSpec, rng: &mut R) -> Vec<f64> {
    (0..spec.len()).map(|_| gumbel_noise(rng)).collect()
}

/// Relaxed sample with explicit noise: `softmax((logits + noise) / tau)` per block.
pub fn gumbel_softmax_with_noise(logits: &[f64], noise: &[f64], spec: &LatentSpec) -> Result<DenseVector> {
    spec.validate()?;
    spec.check_len(logits, "latent logits")?;
    spec.check_len(noise, "gumbel noise")?;
    let perturbed: Vec<f64> = logits.iter().zip(noise).map(|(l, g)| l + g).collect();
    block_softmax(&perturbed, spec, spec.tau)
}

/// Reparameterised Gumbel-Softmax sample of every latent block.
pub fn gumbel_softmax_sample<R: Rng + ?Sized>(logits: &[f64], spec: &LatentSpec, rng: &mut R) -> Result<DenseVector> {
    spec.validate()?;
    spec.check_len(logits, "latent logits")?;
    let noise = draw_noise(spec, rng);
    gumbel_softmax_with_noise(logits, &noise, spec)
}

/// Gradient of a Gumbel-Softmax sample with respect to its logits, given
/// the sample and the upstream gradient `∂L/∂z`.
pub fn gumbel_softmax_backward(sample: &[f64], upstream: &[f64], spec: &LatentSpec) -> Result<DenseVector> {
    spec.check_len(sample, "latent sample")?;
    spec.check_len(upstream, "latent upstream")?;
    Ok(softmax_backward(sample, upstream, spec.cat, spec.tau))
}

fn softmax_backward(probs: &[f64], upstream: &[f64], cat: usize, tau: f64) -> DenseVector {
    let mut out = vec![0.0; probs.len()];
    for ((p, g), o) in probs
        .chunks_exact(cat)
        .zip(upstream.chunks_exact(cat))
        .zip(out.chunks_exact_mut(cat))
    {
        let inner: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
        for k in 0..cat {
            o[k] = p[k] * (g[k] - inner) / tau;
        }
    }
    DenseVector(out)
}

/// One-hot of each block's argmax; ties go to the lowest index.
pub fn harden(z: &[f64], spec: &LatentSpec) -> Result<DenseVector> {
    spec.check_len(z, "latent sample")?;
    let mut out = vec![0.0; z.len()];
    for (block, o) in z.chunks_exact(spec.cat).zip(out.chunks_exact_mut(spec.cat)) {
        let mut best = 0;
        for k in 1..spec.cat {
            if block[k] > block[best] {
                best = k;
            }
        }
        o[best] = 1.0;
    }
    Ok(DenseVector(out))
}

/// `Σ_blocks KL(p ‖ Uniform(cat)) = Σ p·log(p·cat)` and its gradient in `p`.
/// The sum is evaluated as written, so it may dip below zero by rounding,
/// or genuinely when `p` is off the simplex.
pub fn kl_to_uniform(z_probs: &[f64], spec: &LatentSpec) -> Result<(f64, DenseVector)> {
    spec.check_len(z_probs, "latent probabilities")?;
    if let Some(bad) = z_probs.iter().find(|&&p| !(p >= 0.0)) {
        return Err(Error::InvalidInput(format!("negative or NaN probability {bad}")));
    }
    let cat = spec.cat as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(z_probs.len());
    for &p in z_probs {
        if p > 0.0 {
            loss += p * (p * cat).ln();
        }
        grad.push((p.max(f64::MIN_POSITIVE) * cat).ln() + 1.0);
    }
    Ok((loss, DenseVector(grad)))
}

/// KL of `softmax(logits)` to the uniform prior, with the gradient taken
/// with respect to the logits.
pub fn kl_to_uniform_logits(logits: &[f64], spec: &LatentSpec) -> Result<(f64, DenseVector)> {
    let probs = block_softmax(logits, spec, 1.0)?;
    let cat = spec.cat as f64;
    let mut loss = 0.0;
    // ∂/∂p of Σ p log(p·cat) is log(p·cat) + 1; the constant drops out of the softmax Jacobian.
    let dp: Vec<f64> = probs
        .iter()
        .map(|&p| {
            let l = (p.max(f64::MIN_POSITIVE) * cat).ln();
            loss += p * l;
            l
        })
        .collect();
    Ok((loss.max(0.0), softmax_backward(&probs, &dp, spec.cat, 1.0)))
}
