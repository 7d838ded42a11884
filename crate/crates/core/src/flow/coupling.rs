//! Complementary affine coupling block.
//!
//! The input `u = [u1; u2]` is mapped to `v = [v1; v2]` by
//!
//! ```text
//! v1 = u1 ⊙ exp(s2(u2)) + t2(u2)
//! v2 = u2 ⊙ exp(s1(v1)) + t1(v1)
//! ```
//!
//! with the closed-form inverse
//!
//! ```text
//! u2 = (v2 − t1(v1)) ⊙ exp(−s1(v1))
//! u1 = (v1 − t2(u2)) ⊙ exp(−s2(u2))
//! ```
//!
//! Raw scale outputs pass through `c·tanh(s/c)` before exponentiation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{DenseVector, Mlp, MlpCache, MlpGrads, ParamSet};

/// Bound on the effective log-scale of every coupling.
pub const SCALE_CLAMP: f64 = 5.0;

#[inline]
fn soft_clamp(raw: f64) -> f64 {
    SCALE_CLAMP * (raw / SCALE_CLAMP).tanh()
}

/// Derivative of [`soft_clamp`] given its output.
#[inline]
fn soft_clamp_grad(clamped: f64) -> f64 {
    let t = clamped / SCALE_CLAMP;
    1.0 - t * t
}

/// Raw subnetwork output that the clamp maps to `scale`; `|scale| < SCALE_CLAMP`.
pub fn raw_scale_for(scale: f64) -> f64 {
    SCALE_CLAMP * (scale / SCALE_CLAMP).atanh()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingBlock {
    pub s1: Mlp,
    pub s2: Mlp,
    pub t1: Mlp,
    pub t2: Mlp,
    split_point: usize,
    width: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingGrads {
    pub s1: MlpGrads,
    pub s2: MlpGrads,
    pub t1: MlpGrads,
    pub t2: MlpGrads,
}

/// Record of a forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    u1: Vec<f64>,
    u2: Vec<f64>,
    scale2: Vec<f64>,
    scale1: Vec<f64>,
    s2: MlpCache,
    t2: MlpCache,
    s1: MlpCache,
    t1: MlpCache,
}

/// Record of an inverse evaluation.
#[derive(Debug, Clone)]
pub struct InverseCache {
    u1: Vec<f64>,
    u2: Vec<f64>,
    scale2: Vec<f64>,
    scale1: Vec<f64>,
    s2: MlpCache,
    t2: MlpCache,
    s1: MlpCache,
    t1: MlpCache,
}

impl ForwardCache {
    /// Hidden-unit activity of the four subnetworks, in `s2, t2, s1, t1` order.
    pub fn relu_pattern(&self) -> Vec<bool> {
        [&self.s2, &self.t2, &self.s1, &self.t1].iter().flat_map(|c| c.relu_pattern()).collect()
    }
}

impl InverseCache {
    /// Hidden-unit activity of the four subnetworks, in `s2, t2, s1, t1` order.
    pub fn relu_pattern(&self) -> Vec<bool> {
        [&self.s2, &self.t2, &self.s1, &self.t1].iter().flat_map(|c| c.relu_pattern()).collect()
    }
}

pub struct CouplingOutput {
    pub v: DenseVector,
    pub logdet: f64,
    pub cache: ForwardCache,
}

impl CouplingBlock {
    /// Orthogonally initialised block with `split_point = width / 2`.
    pub fn new(width: usize, hidden: usize, depth: usize, seed: u64) -> Self {
        assert!(width >= 2, "coupling width must be at least 2");
        let split = width / 2;
        let rest = width - split;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CouplingBlock {
            s1: Mlp::new(split, hidden, rest, depth, rng.random()),
            s2: Mlp::new(rest, hidden, split, depth, rng.random()),
            t1: Mlp::new(split, hidden, rest, depth, rng.random()),
            t2: Mlp::new(rest, hidden, split, depth, rng.random()),
            split_point: split,
            width,
        }
    }

    /// Block whose subnetworks are all zero: the identity map.
    pub fn identity(width: usize, hidden: usize, depth: usize) -> Self {
        let mut b = Self::new(width, hidden, depth, 0);
        b.fill_zero();
        b
    }

    /// Assemble from explicit subnetworks, checking their geometry.
    pub fn from_parts(s1: Mlp, s2: Mlp, t1: Mlp, t2: Mlp, split_point: usize) -> Result<Self> {
        let width = s1.in_dim() + s1.out_dim();
        if split_point == 0 || split_point >= width {
            return Err(Error::InvalidInput(format!(
                "split point {split_point} outside 1..{width}"
            )));
        }
        let rest = width - split_point;
        for (name, net, i, o) in [
            ("s1", &s1, split_point, rest),
            ("t1", &t1, split_point, rest),
            ("s2", &s2, rest, split_point),
            ("t2", &t2, rest, split_point),
        ] {
            if net.in_dim() != i || net.out_dim() != o {
                return Err(Error::InvalidInput(format!(
                    "{name} maps {}→{}, expected {i}→{o}",
                    net.in_dim(),
                    net.out_dim()
                )));
            }
        }
        Ok(CouplingBlock {
            s1,
            s2,
            t1,
            t2,
            split_point,
            width,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn split_point(&self) -> usize {
        self.split_point
    }

    pub fn grads_like(&self) -> CouplingGrads {
        CouplingGrads {
            s1: self.s1.grads_like(),
            s2: self.s2.grads_like(),
            t1: self.t1.grads_like(),
            t2: self.t2.grads_like(),
        }
    }

    pub fn forward(&self, u: &[f64]) -> Result<CouplingOutput> {
        if u.len() != self.width {
            return Err(Error::dim("coupling input", self.width, u.len()));
        }
        let (u1, u2) = u.split_at(self.split_point);
        let (raw2, s2_cache) = self.s2.forward(u2)?;
        let (shift2, t2_cache) = self.t2.forward(u2)?;
        let scale2: Vec<f64> = raw2.iter().map(|&r| soft_clamp(r)).collect();
        let v1: Vec<f64> = (0..u1.len())
            .map(|i| u1[i] * scale2[i].exp() + shift2[i])
            .collect();

        let (raw1, s1_cache) = self.s1.forward(&v1)?;
        let (shift1, t1_cache) = self.t1.forward(&v1)?;
        let scale1: Vec<f64> = raw1.iter().map(|&r| soft_clamp(r)).collect();
        let v2: Vec<f64> = (0..u2.len())
            .map(|i| u2[i] * scale1[i].exp() + shift1[i])
            .collect();

        let logdet = scale2.iter().sum::<f64>() + scale1.iter().sum::<f64>();
        let mut v = v1;
        v.extend_from_slice(&v2);
        Ok(CouplingOutput {
            v: DenseVector(v),
            logdet,
            cache: ForwardCache {
                u1: u1.to_vec(),
                u2: u2.to_vec(),
                scale2,
                scale1,
                s2: s2_cache,
                t2: t2_cache,
                s1: s1_cache,
                t1: t1_cache,
            },
        })
    }

    /// Forward map only, without caches.
    pub fn apply(&self, u: &[f64]) -> Result<(DenseVector, f64)> {
        if u.len() != self.width {
            return Err(Error::dim("coupling input", self.width, u.len()));
        }
        let (u1, u2) = u.split_at(self.split_point);
        let raw2 = self.s2.eval(u2)?;
        let shift2 = self.t2.eval(u2)?;
        let mut sum2 = 0.0;
        let mut v = Vec::with_capacity(self.width);
        for i in 0..u1.len() {
            let s = soft_clamp(raw2[i]);
            sum2 += s;
            v.push(u1[i] * s.exp() + shift2[i]);
        }
        let raw1 = self.s1.eval(&v)?;
        let shift1 = self.t1.eval(&v)?;
        let mut sum1 = 0.0;
        for i in 0..u2.len() {
            let s = soft_clamp(raw1[i]);
            sum1 += s;
            v.push(u2[i] * s.exp() + shift1[i]);
        }
        // Same summation order as `forward`, so both agree bitwise.
        Ok((DenseVector(v), sum2 + sum1))
    }

    pub fn inverse(&self, v: &[f64]) -> Result<(DenseVector, InverseCache)> {
        if v.len() != self.width {
            return Err(Error::dim("coupling inverse input", self.width, v.len()));
        }
        let (v1, v2) = v.split_at(self.split_point);
        let (raw1, s1_cache) = self.s1.forward(v1)?;
        let (shift1, t1_cache) = self.t1.forward(v1)?;
        let scale1: Vec<f64> = raw1.iter().map(|&r| soft_clamp(r)).collect();
        let u2: Vec<f64> = (0..v2.len())
            .map(|i| (v2[i] - shift1[i]) * (-scale1[i]).exp())
            .collect();

        let (raw2, s2_cache) = self.s2.forward(&u2)?;
        let (shift2, t2_cache) = self.t2.forward(&u2)?;
        let scale2: Vec<f64> = raw2.iter().map(|&r| soft_clamp(r)).collect();
        let u1: Vec<f64> = (0..v1.len())
            .map(|i| (v1[i] - shift2[i]) * (-scale2[i]).exp())
            .collect();

        let mut u = u1.clone();
        u.extend_from_slice(&u2);
        Ok((
            DenseVector(u),
            InverseCache {
                u1,
                u2,
                scale2,
                scale1,
                s2: s2_cache,
                t2: t2_cache,
                s1: s1_cache,
                t1: t1_cache,
            },
        ))
    }

    /// Inverse map only, without caches.
    pub fn invert(&self, v: &[f64]) -> Result<DenseVector> {
        if v.len() != self.width {
            return Err(Error::dim("coupling inverse input", self.width, v.len()));
        }
        let (v1, v2) = v.split_at(self.split_point);
        let raw1 = self.s1.eval(v1)?;
        let shift1 = self.t1.eval(v1)?;
        let u2: Vec<f64> = (0..v2.len())
            .map(|i| (v2[i] - shift1[i]) * (-soft_clamp(raw1[i])).exp())
            .collect();
        let raw2 = self.s2.eval(&u2)?;
        let shift2 = self.t2.eval(&u2)?;
        let mut u: Vec<f64> = (0..v1.len())
            .map(|i| (v1[i] - shift2[i]) * (-soft_clamp(raw2[i])).exp())
            .collect();
        u.extend_from_slice(&u2);
        Ok(DenseVector(u))
    }

    /// Gradients of the forward map. `upstream` is ∂L/∂v; returns ∂L/∂u and
    /// adds parameter gradients into `grads`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: &[f64],
        grads: &mut CouplingGrads,
    ) -> Result<DenseVector> {
        if upstream.len() != self.width {
            return Err(Error::dim("coupling upstream", self.width, upstream.len()));
        }
        if cache.u1.len() != self.split_point {
            return Err(Error::Contract("coupling cache has a different split".into()));
        }
        let (dv1, dv2) = upstream.split_at(self.split_point);
        let n2 = self.width - self.split_point;

        // v2 = u2 ⊙ exp(S1(v1)) + T1(v1)
        let mut du2 = vec![0.0; n2];
        let mut draw1 = vec![0.0; n2];
        for i in 0..n2 {
            let e = cache.scale1[i].exp();
            du2[i] = dv2[i] * e;
            draw1[i] = dv2[i] * cache.u2[i] * e * soft_clamp_grad(cache.scale1[i]);
        }
        let from_s1 = self.s1.backward_accumulate(&cache.s1, &draw1, &mut grads.s1)?;
        let from_t1 = self.t1.backward_accumulate(&cache.t1, dv2, &mut grads.t1)?;
        let dv1_total: Vec<f64> = (0..self.split_point)
            .map(|i| dv1[i] + from_s1[i] + from_t1[i])
            .collect();

        // v1 = u1 ⊙ exp(S2(u2)) + T2(u2)
        let mut du1 = vec![0.0; self.split_point];
        let mut draw2 = vec![0.0; self.split_point];
        for i in 0..self.split_point {
            let e = cache.scale2[i].exp();
            du1[i] = dv1_total[i] * e;
            draw2[i] = dv1_total[i] * cache.u1[i] * e * soft_clamp_grad(cache.scale2[i]);
        }
        let from_s2 = self.s2.backward_accumulate(&cache.s2, &draw2, &mut grads.s2)?;
        let from_t2 = self.t2.backward_accumulate(&cache.t2, &dv1_total, &mut grads.t2)?;
        for i in 0..n2 {
            du2[i] += from_s2[i] + from_t2[i];
        }
        du1.extend_from_slice(&du2);
        Ok(DenseVector(du1))
    }

    /// Gradients of the inverse map. `upstream` is ∂L/∂u; returns ∂L/∂v and
    /// adds parameter gradients into `grads`.
    pub fn backward_inverse(
        &self,
        cache: &InverseCache,
        upstream: &[f64],
        grads: &mut CouplingGrads,
    ) -> Result<DenseVector> {
        if upstream.len() != self.width {
            return Err(Error::dim("coupling upstream", self.width, upstream.len()));
        }
        if cache.u1.len() != self.split_point {
            return Err(Error::Contract("coupling cache has a different split".into()));
        }
        let (du1, du2) = upstream.split_at(self.split_point);
        let n2 = self.width - self.split_point;

        // u1 = (v1 − T2(u2)) ⊙ exp(−S2(u2))
        let mut dv1 = vec![0.0; self.split_point];
        let mut dshift2 = vec![0.0; self.split_point];
        let mut draw2 = vec![0.0; self.split_point];
        for i in 0..self.split_point {
            let e = (-cache.scale2[i]).exp();
            dv1[i] = du1[i] * e;
            dshift2[i] = -du1[i] * e;
            draw2[i] = -du1[i] * cache.u1[i] * soft_clamp_grad(cache.scale2[i]);
        }
        let from_s2 = self.s2.backward_accumulate(&cache.s2, &draw2, &mut grads.s2)?;
        let from_t2 = self.t2.backward_accumulate(&cache.t2, &dshift2, &mut grads.t2)?;
        let du2_total: Vec<f64> = (0..n2).map(|i| du2[i] + from_s2[i] + from_t2[i]).collect();

        // u2 = (v2 − T1(v1)) ⊙ exp(−S1(v1))
        let mut dv2 = vec![0.0; n2];
        let mut dshift1 = vec![0.0; n2];
        let mut draw1 = vec![0.0; n2];
        for i in 0..n2 {
            let e = (-cache.scale1[i]).exp();
            dv2[i] = du2_total[i] * e;
            dshift1[i] = -du2_total[i] * e;
            draw1[i] = -du2_total[i] * cache.u2[i] * soft_clamp_grad(cache.scale1[i]);
        }
        let from_s1 = self.s1.backward_accumulate(&cache.s1, &draw1, &mut grads.s1)?;
        let from_t1 = self.t1.backward_accumulate(&cache.t1, &dshift1, &mut grads.t1)?;
        for i in 0..self.split_point {
            dv1[i] += from_s1[i] + from_t1[i];
        }
        dv1.extend_from_slice(&dv2);
        Ok(DenseVector(dv1))
    }
}

impl ParamSet for CouplingBlock {
    fn tensors(&self) -> Vec<&[f64]> {
        [&self.s1, &self.s2, &self.t1, &self.t2]
            .into_iter()
            .flat_map(|m| m.tensors())
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.s1.tensors_mut();
        out.extend(self.s2.tensors_mut());
        out.extend(self.t1.tensors_mut());
        out.extend(self.t2.tensors_mut());
        out
    }

    fn tensor_names(&self) -> Vec<String> {
        [("s1", &self.s1), ("s2", &self.s2), ("t1", &self.t1), ("t2", &self.t2)]
            .into_iter()
            .flat_map(|(n, m)| m.tensor_names().into_iter().map(move |t| format!("{n}.{t}")))
            .collect()
    }
}

impl ParamSet for CouplingGrads {
    fn tensors(&self) -> Vec<&[f64]> {
        [&self.s1, &self.s2, &self.t1, &self.t2]
            .into_iter()
            .flat_map(|m| m.tensors())
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.s1.tensors_mut();
        out.extend(self.s2.tensors_mut());
        out.extend(self.t1.tensors_mut());
        out.extend(self.t2.tensors_mut());
        out
    }

    fn tensor_names(&self) -> Vec<String> {
        [("s1", &self.s1), ("s2", &self.s2), ("t1", &self.t1), ("t2", &self.t2)]
            .into_iter()
            .flat_map(|(n, m)| m.tensor_names().into_iter().map(move |t| format!("{n}.{t}")))
            .collect()
    }
}
