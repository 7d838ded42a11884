use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::coupling::{CouplingBlock, CouplingGrads, ForwardCache, InverseCache};
use super::layout::IoLayout;
use super::permutation::PermutationLayer;
use crate::error::{Error, Result};
use crate::numerics::{DenseVector, ParamSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Stack of coupling blocks with a fixed permutation between neighbours.
///
/// One parameter set serves both directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnModel {
    layout: IoLayout,
    couplings: Vec<CouplingBlock>,
    permutations: Vec<PermutationLayer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnGrads {
    pub blocks: Vec<CouplingGrads>,
}

#[derive(Debug, Clone)]
enum StageCaches {
    Forward(Vec<ForwardCache>),
    Inverse(Vec<InverseCache>),
}

#[derive(Debug, Clone)]
pub struct InnCache {
    stages: StageCaches,
}

impl InnCache {
    pub fn direction(&self) -> Direction {
        match self.stages {
            StageCaches::Forward(_) => Direction::Forward,
            StageCaches::Inverse(_) => Direction::Inverse,
        }
    }

    /// On/off state of every hidden ReLU unit the pass went through. Two
    /// evaluations with equal patterns lie in the same linear region of the
    /// subnetworks.
    pub fn relu_pattern(&self) -> Vec<bool> {
        match &self.stages {
            StageCaches::Forward(c) => c.iter().flat_map(|c| c.relu_pattern()).collect(),
            StageCaches::Inverse(c) => c.iter().flat_map(|c| c.relu_pattern()).collect(),
        }
    }
}

pub struct InnForward {
    pub y: DenseVector,
    pub z_logits: DenseVector,
    /// Full-width network output, padding included.
    pub output: DenseVector,
    pub logdet: f64,
    pub cache: InnCache,
}

pub struct InnInverse {
    pub x: DenseVector,
    /// Full-width reconstruction, padding included.
    pub full: DenseVector,
    pub cache: InnCache,
}

/// Gradient arriving at the outputs of a pass.
pub enum Upstream<'a> {
    Forward { y: &'a [f64], z: &'a [f64] },
    Inverse { x: &'a [f64] },
}

/// Gradient with respect to the inputs of a pass.
#[derive(Debug, Clone, PartialEq)]
pub enum InputGrad {
    Forward { x: DenseVector },
    Inverse { y: DenseVector, z: DenseVector },
}

impl InnModel {
    /// Randomly initialised model: orthogonal subnetwork weights and seeded
    /// permutations. There is no permutation after the final block.
    pub fn new(layout: IoLayout, blocks: usize, hidden: usize, depth: usize, seed: u64) -> Result<Self> {
        layout.validate()?;
        if blocks == 0 {
            return Err(Error::InvalidInput("an INN needs at least one coupling block".into()));
        }
        let width = layout.width();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut couplings = Vec::with_capacity(blocks);
        let mut permutations = Vec::with_capacity(blocks - 1);
        for b in 0..blocks {
            couplings.push(CouplingBlock::new(width, hidden, depth, rng.random()));
            if b + 1 < blocks {
                permutations.push(PermutationLayer::random(width, rng.random()));
            }
        }
        Ok(InnModel {
            layout,
            couplings,
            permutations,
        })
    }

    /// All-zero subnetworks and identity permutations.
    pub fn identity(layout: IoLayout, blocks: usize, hidden: usize, depth: usize) -> Result<Self> {
        let mut m = Self::new(layout, blocks, hidden, depth, 0)?;
        m.fill_zero();
        let width = m.width();
        for p in &mut m.permutations {
            *p = PermutationLayer::identity(width);
        }
        Ok(m)
    }

    pub fn from_parts(
        layout: IoLayout,
        couplings: Vec<CouplingBlock>,
        permutations: Vec<PermutationLayer>,
    ) -> Result<Self> {
        let m = InnModel {
            layout,
            couplings,
            permutations,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        let width = self.layout.width();
        if self.couplings.is_empty() {
            return Err(Error::InvalidInput("an INN needs at least one coupling block".into()));
        }
        if self.permutations.len() + 1 != self.couplings.len() {
            return Err(Error::InvalidInput(
                "expected exactly one permutation between consecutive blocks".into(),
            ));
        }
        for c in &self.couplings {
            if c.width() != width {
                return Err(Error::dim("coupling width", width, c.width()));
            }
            CouplingBlock::from_parts(
                c.s1.clone(),
                c.s2.clone(),
                c.t1.clone(),
                c.t2.clone(),
                c.split_point(),
            )?;
        }
        for p in &self.permutations {
            if p.width() != width {
                return Err(Error::dim("permutation width", width, p.width()));
            }
            PermutationLayer::from_indices(p.indices().to_vec())?;
        }
        Ok(())
    }

    pub fn layout(&self) -> &IoLayout {
        &self.layout
    }

    pub fn width(&self) -> usize {
        self.layout.width()
    }

    pub fn couplings(&self) -> &[CouplingBlock] {
        &self.couplings
    }

    pub fn couplings_mut(&mut self) -> &mut [CouplingBlock] {
        &mut self.couplings
    }

    pub fn permutations(&self) -> &[PermutationLayer] {
        &self.permutations
    }

    pub fn grads_like(&self) -> InnGrads {
        InnGrads {
            blocks: self.couplings.iter().map(|c| c.grads_like()).collect(),
        }
    }

    fn pad(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        out.resize(self.width(), 0.0);
        out
    }

    fn output_side(&self, y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.layout.y_dim {
            return Err(Error::dim("INN y input", self.layout.y_dim, y.len()));
        }
        if z.len() != self.layout.z_len() {
            return Err(Error::dim("INN z input", self.layout.z_len(), z.len()));
        }
        let mut v = y.to_vec();
        v.extend_from_slice(z);
        Ok(self.pad(&v))
    }

    fn split_output(&self, out: &[f64]) -> (DenseVector, DenseVector) {
        let y_dim = self.layout.y_dim;
        (
            DenseVector(out[..y_dim].to_vec()),
            DenseVector(out[y_dim..y_dim + self.layout.z_len()].to_vec()),
        )
    }

    /// `x → [y; z_logits]`, recording what the backward pass needs.
    pub fn forward(&self, x: &[f64]) -> Result<InnForward> {
        if x.len() != self.layout.x_dim {
            return Err(Error::dim("INN x input", self.layout.x_dim, x.len()));
        }
        let mut h = self.pad(x);
        let mut caches = Vec::with_capacity(self.couplings.len());
        let mut logdet = 0.0;
        for (b, block) in self.couplings.iter().enumerate() {
            let out = block.forward(&h)?;
            logdet += out.logdet;
            caches.push(out.cache);
            h = out.v.into_inner();
            if let Some(p) = self.permutations.get(b) {
                h = p.permute(&h)?.into_inner();
            }
        }
        let (y, z_logits) = self.split_output(&h);
        Ok(InnForward {
            y,
            z_logits,
            output: DenseVector(h),
            logdet,
            cache: InnCache {
                stages: StageCaches::Forward(caches),
            },
        })
    }

    /// Forward map without caches: `(y, z_logits, logdet)`.
    pub fn predict(&self, x: &[f64]) -> Result<(DenseVector, DenseVector, f64)> {
        let (out, logdet) = self.forward_full(x)?;
        let (y, z) = self.split_output(&out);
        Ok((y, z, logdet))
    }

    /// Full-width forward output and log-determinant, without caches.
    pub fn forward_full(&self, x: &[f64]) -> Result<(DenseVector, f64)> {
        if x.len() != self.layout.x_dim {
            return Err(Error::dim("INN x input", self.layout.x_dim, x.len()));
        }
        self.forward_padded(&self.pad(x))
    }

    /// Forward map on an already full-width vector.
    pub fn forward_padded(&self, h: &[f64]) -> Result<(DenseVector, f64)> {
        if h.len() != self.width() {
            return Err(Error::dim("INN full-width input", self.width(), h.len()));
        }
        let mut h = h.to_vec();
        let mut logdet = 0.0;
        for (b, block) in self.couplings.iter().enumerate() {
            let (v, ld) = block.apply(&h)?;
            logdet += ld;
            h = v.into_inner();
            if let Some(p) = self.permutations.get(b) {
                h = p.permute(&h)?.into_inner();
            }
        }
        Ok((DenseVector(h), logdet))
    }

    /// `[y; z] → x`, recording what the backward pass needs.
    pub fn inverse(&self, y: &[f64], z: &[f64]) -> Result<InnInverse> {
        let mut h = self.output_side(y, z)?;
        let mut caches = Vec::with_capacity(self.couplings.len());
        for (b, block) in self.couplings.iter().enumerate().rev() {
            if let Some(p) = self.permutations.get(b) {
                h = p.inverse_permute(&h)?.into_inner();
            }
            let (u, cache) = block.inverse(&h)?;
            caches.push(cache);
            h = u.into_inner();
        }
        caches.reverse();
        Ok(InnInverse {
            x: DenseVector(h[..self.layout.x_dim].to_vec()),
            full: DenseVector(h),
            cache: InnCache {
                stages: StageCaches::Inverse(caches),
            },
        })
    }

    /// Inverse map without caches, returning the full-width reconstruction.
    pub fn inverse_full(&self, y: &[f64], z: &[f64]) -> Result<DenseVector> {
        self.inverse_padded(&self.output_side(y, z)?)
    }

    /// Inverse map on an already full-width vector.
    pub fn inverse_padded(&self, v: &[f64]) -> Result<DenseVector> {
        if v.len() != self.width() {
            return Err(Error::dim("INN full-width output", self.width(), v.len()));
        }
        let mut h = v.to_vec();
        for (b, block) in self.couplings.iter().enumerate().rev() {
            if let Some(p) = self.permutations.get(b) {
                h = p.inverse_permute(&h)?.into_inner();
            }
            h = block.invert(&h)?.into_inner();
        }
        Ok(DenseVector(h))
    }

    /// Inverse map without caches: the first `x_dim` entries.
    pub fn reconstruct(&self, y: &[f64], z: &[f64]) -> Result<DenseVector> {
        let mut full = self.inverse_full(y, z)?.into_inner();
        full.truncate(self.layout.x_dim);
        Ok(DenseVector(full))
    }

    /// `log |det ∂f/∂x|` of the full-width forward map at `x`.
    pub fn logdet(&self, x: &[f64]) -> Result<f64> {
        Ok(self.forward_full(x)?.1)
    }

    /// Reverse pass through the whole stack in the direction the cache was
    /// recorded in. Parameter gradients are added into `grads`, so gradients
    /// of a forward and an inverse pass can share one store.
    pub fn backward(&self, cache: &InnCache, upstream: Upstream<'_>, grads: &mut InnGrads) -> Result<InputGrad> {
        if grads.blocks.len() != self.couplings.len() {
            return Err(Error::Contract("gradient store does not match the model".into()));
        }
        match (&cache.stages, upstream) {
            (StageCaches::Forward(caches), Upstream::Forward { y, z }) => {
                if caches.len() != self.couplings.len() {
                    return Err(Error::Contract("cache has a different block count".into()));
                }
                let mut g = self.output_side(y, z)?;
                for b in (0..self.couplings.len()).rev() {
                    if let Some(p) = self.permutations.get(b) {
                        g = p.inverse_permute(&g)?.into_inner();
                    }
                    g = self.couplings[b]
                        .backward(&caches[b], &g, &mut grads.blocks[b])?
                        .into_inner();
                }
                g.truncate(self.layout.x_dim);
                Ok(InputGrad::Forward { x: DenseVector(g) })
            }
            (StageCaches::Inverse(caches), Upstream::Inverse { x }) => {
                if caches.len() != self.couplings.len() {
                    return Err(Error::Contract("cache has a different block count".into()));
                }
                if x.len() != self.layout.x_dim {
                    return Err(Error::dim("INN x upstream", self.layout.x_dim, x.len()));
                }
                let mut g = self.pad(x);
                for b in 0..self.couplings.len() {
                    g = self.couplings[b]
                        .backward_inverse(&caches[b], &g, &mut grads.blocks[b])?
                        .into_inner();
                    if let Some(p) = self.permutations.get(b) {
                        g = p.permute(&g)?.into_inner();
                    }
                }
                let (y, z) = self.split_output(&g);
                Ok(InputGrad::Inverse { y, z })
            }
            (stages, _) => Err(Error::Contract(format!(
                "cache was recorded for the {:?} direction but the upstream gradient is for the other one",
                match stages {
                    StageCaches::Forward(_) => Direction::Forward,
                    StageCaches::Inverse(_) => Direction::Inverse,
                }
            ))),
        }
    }
}

impl ParamSet for InnModel {
    fn tensors(&self) -> Vec<&[f64]> {
        self.couplings.iter().flat_map(|c| c.tensors()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.couplings.iter_mut().flat_map(|c| c.tensors_mut()).collect()
    }

    fn tensor_names(&self) -> Vec<String> {
        self.couplings
            .iter()
            .enumerate()
            .flat_map(|(b, c)| c.tensor_names().into_iter().map(move |n| format!("block{b}.{n}")))
            .collect()
    }
}

impl ParamSet for InnGrads {
    fn tensors(&self) -> Vec<&[f64]> {
        self.blocks.iter().flat_map(|c| c.tensors()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.blocks.iter_mut().flat_map(|c| c.tensors_mut()).collect()
    }

    fn tensor_names(&self) -> Vec<String> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(b, c)| c.tensor_names().into_iter().map(move |n| format!("block{b}.{n}")))
            .collect()
    }
}

const MODEL_FORMAT: &str = "innmorph-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: InnModel,
}

impl InnModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)
            .map_err(|e| Error::Checkpoint(format!("unreadable model file: {e}")))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Checkpoint(format!("not a model file (format `{}`)", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                file.version
            )));
        }
        file.model
            .validate()
            .map_err(|e| Error::Checkpoint(format!("inconsistent model: {e}")))?;
        Ok(file.model)
    }
}

pub fn save_model(model: &InnModel, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(model.to_json()?.as_bytes())?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<InnModel> {
    InnModel::from_json(&fs::read_to_string(path)?)
}
