use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::Task;
use crate::numerics::{DenseVector, Mlp};

/// Feedforward comparison model: three affine layers with ReLU between them,
/// mapping the task input straight to the output word vector. It has no
/// inverse direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub task: Task,
    pub mlp: Mlp,
}

pub const BASELINE_DEPTH: usize = 3;

impl BaselineModel {
    pub fn new(task: Task, in_dim: usize, out_dim: usize, hidden: usize, seed: u64) -> Self {
        BaselineModel {
            task,
            mlp: Mlp::new(in_dim, hidden, out_dim, BASELINE_DEPTH, seed),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.mlp.in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.mlp.out_dim()
    }

    pub fn predict(&self, x: &[f64]) -> Result<DenseVector> {
        if x.len() != self.in_dim() {
            return Err(Error::dim("baseline input", self.in_dim(), x.len()));
        }
        self.mlp.eval(x)
    }
}
