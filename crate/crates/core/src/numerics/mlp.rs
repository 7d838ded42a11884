//! Multilayer perceptrons with explicit reverse-mode gradients.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{orthogonal_init, DenseMatrix, DenseVector};
use super::params::ParamSet;
use crate::error::{Error, Result};

static STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    STAMP.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: DenseMatrix,
    pub bias: DenseVector,
    pub activation: Activation,
}

impl Dense {
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }
}

/// Feed-forward network: affine layers, ReLU between them, identity output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
    /// Changes whenever parameters are handed out mutably; caches remember it.
    #[serde(skip, default = "fresh_stamp")]
    stamp: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Activations recorded by [`Mlp::forward`], consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct MlpCache {
    stamp: u64,
    /// Input of every layer.
    inputs: Vec<Vec<f64>>,
    /// Output of every layer after its activation.
    outputs: Vec<Vec<f64>>,
}

impl MlpCache {
    /// Whether each hidden ReLU unit was active, layer by layer.
    pub fn relu_pattern(&self) -> Vec<bool> {
        let hidden = self.outputs.len().saturating_sub(1);
        self.outputs[..hidden].iter().flatten().map(|&o| o > 0.0).collect()
    }
}

/// Gradient buffers shaped like an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<(DenseMatrix, DenseVector)>,
}

impl Mlp {
    /// Build from explicit layers. Dimensions must chain and the last
    /// activation must be the identity.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidInput("an MLP needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::dim("MLP layer chain", pair[0].out_dim(), pair[1].in_dim()));
            }
        }
        for l in &layers {
            if l.bias.len() != l.out_dim() {
                return Err(Error::dim("MLP bias", l.out_dim(), l.bias.len()));
            }
        }
        if layers.last().map(|l| l.activation) != Some(Activation::Identity) {
            return Err(Error::InvalidInput("final MLP layer must be linear".into()));
        }
        Ok(Mlp {
            layers,
            stamp: fresh_stamp(),
        })
    }

    /// `depth` affine layers with orthogonally initialised weights and zero biases.
    pub fn new(in_dim: usize, hidden: usize, out_dim: usize, depth: usize, seed: u64) -> Self {
        assert!(depth >= 1, "depth must be at least 1");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![in_dim];
        dims.extend(std::iter::repeat_n(hidden, depth - 1));
        dims.push(out_dim);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, d)| Dense {
                weight: orthogonal_init(d[1], d[0], rng.random()),
                bias: DenseVector::zeros(d[1]),
                activation: if i + 1 == depth {
                    Activation::Identity
                } else {
                    Activation::Relu
                },
            })
            .collect();
        Mlp {
            layers,
            stamp: fresh_stamp(),
        }
    }

    /// Same shape as [`Mlp::new`] with every weight and bias zero.
    pub fn zeros(in_dim: usize, hidden: usize, out_dim: usize, depth: usize) -> Self {
        let mut m = Mlp::new(in_dim, hidden, out_dim, depth, 0);
        m.fill_zero();
        m
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.stamp = fresh_stamp();
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn grads_like(&self) -> MlpGrads {
        MlpGrads {
            layers: self
                .layers
                .iter()
                .map(|l| {
                    (
                        DenseMatrix::zeros(l.out_dim(), l.in_dim()),
                        DenseVector::zeros(l.out_dim()),
                    )
                })
                .collect(),
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<(DenseVector, MlpCache)> {
        if input.len() != self.in_dim() {
            return Err(Error::dim("MLP input", self.in_dim(), input.len()));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut h = input.to_vec();
        for layer in &self.layers {
            let out = apply_layer(layer, &h);
            inputs.push(h);
            h = out.clone();
            outputs.push(out);
        }
        let cache = MlpCache {
            stamp: self.stamp,
            inputs,
            outputs,
        };
        Ok((DenseVector(h), cache))
    }

    /// Forward pass without recording activations.
    pub fn eval(&self, input: &[f64]) -> Result<DenseVector> {
        if input.len() != self.in_dim() {
            return Err(Error::dim("MLP input", self.in_dim(), input.len()));
        }
        let mut h = input.to_vec();
        for layer in &self.layers {
            h = apply_layer(layer, &h);
        }
        Ok(DenseVector(h))
    }

    /// Reverse pass returning fresh parameter gradients and the input gradient.
    pub fn backward(&self, cache: &MlpCache, upstream: &[f64]) -> Result<(MlpGrads, DenseVector)> {
        let mut grads = self.grads_like();
        let input_grad = self.backward_accumulate(cache, upstream, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Reverse pass adding parameter gradients into `grads`.
    pub fn backward_accumulate(
        &self,
        cache: &MlpCache,
        upstream: &[f64],
        grads: &mut MlpGrads,
    ) -> Result<DenseVector> {
        if cache.stamp != self.stamp || cache.inputs.len() != self.layers.len() {
            return Err(Error::Contract(
                "MLP cache was produced by different or since-modified parameters".into(),
            ));
        }
        if upstream.len() != self.out_dim() {
            return Err(Error::dim("MLP upstream gradient", self.out_dim(), upstream.len()));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(Error::Contract("gradient store does not match MLP".into()));
        }
        let mut g = upstream.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            if layer.activation == Activation::Relu {
                for (gi, &o) in g.iter_mut().zip(&cache.outputs[idx]) {
                    if o <= 0.0 {
                        *gi = 0.0;
                    }
                }
            }
            let (wg, bg) = &mut grads.layers[idx];
            wg.add_outer(&g, &cache.inputs[idx]);
            for (b, gi) in bg.iter_mut().zip(&g) {
                *b += gi;
            }
            let mut next = vec![0.0; layer.in_dim()];
            layer.weight.matvec_transposed_acc(&g, &mut next);
            g = next;
        }
        Ok(DenseVector(g))
    }
}

fn apply_layer(layer: &Dense, input: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; layer.out_dim()];
    layer.weight.matvec_into(input, &mut out);
    for (o, b) in out.iter_mut().zip(layer.bias.iter()) {
        *o += b;
    }
    if layer.activation == Activation::Relu {
        for o in out.iter_mut() {
            if *o < 0.0 {
                *o = 0.0;
            }
        }
    }
    out
}

impl ParamSet for Mlp {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.values(), &l.bias[..]])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.stamp = fresh_stamp();
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.values_mut(), &mut l.bias[..]])
            .collect()
    }

    fn tensor_names(&self) -> Vec<String> {
        (0..self.layers.len())
            .flat_map(|i| [format!("layer{i}.weight"), format!("layer{i}.bias")])
            .collect()
    }
}

impl ParamSet for MlpGrads {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|(w, b)| [w.values(), &b[..]]).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|(w, b)| [w.values_mut(), &mut b[..]])
            .collect()
    }

    fn tensor_names(&self) -> Vec<String> {
        (0..self.layers.len())
            .flat_map(|i| [format!("layer{i}.weight"), format!("layer{i}.bias")])
            .collect()
    }
}
