use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseVector;

/// Fixed shuffle of vector positions: `out[i] = v[forward_index[i]]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationLayer {
    forward_index: Vec<usize>,
}

impl PermutationLayer {
    pub fn identity(width: usize) -> Self {
        PermutationLayer {
            forward_index: (0..width).collect(),
        }
    }

    /// Seeded Fisher–Yates shuffle.
    pub fn random(width: usize, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..width).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        PermutationLayer { forward_index: idx }
    }

    pub fn from_indices(forward_index: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; forward_index.len()];
        for &i in &forward_index {
            if i >= seen.len() || seen[i] {
                return Err(Error::InvalidInput(format!(
                    "permutation index {i} repeated or out of range"
                )));
            }
            seen[i] = true;
        }
        Ok(PermutationLayer { forward_index })
    }

    pub fn width(&self) -> usize {
        self.forward_index.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.forward_index
    }

    pub fn permute(&self, v: &[f64]) -> Result<DenseVector> {
        if v.len() != self.width() {
            return Err(Error::dim("permutation input", self.width(), v.len()));
        }
        Ok(DenseVector(self.forward_index.iter().map(|&i| v[i]).collect()))
    }

    pub fn inverse_permute(&self, v: &[f64]) -> Result<DenseVector> {
        if v.len() != self.width() {
            return Err(Error::dim("permutation input", self.width(), v.len()));
        }
        let mut out = vec![0.0; v.len()];
        for (k, &i) in self.forward_index.iter().enumerate() {
            out[i] = v[k];
        }
        Ok(DenseVector(out))
    }
}
