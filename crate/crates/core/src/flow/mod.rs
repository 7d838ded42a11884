//! Invertible network: affine coupling blocks, fixed permutations, the
//! stacked model with its exact inverse, padding layout and log-determinant.

mod coupling;
mod layout;
mod model;
mod permutation;

pub use coupling::{raw_scale_for, CouplingBlock, CouplingGrads, CouplingOutput, ForwardCache, InverseCache, SCALE_CLAMP};
pub use layout::{IoLayout, Task};
pub use model::{
    load_model, save_model, Direction, InnCache, InnForward, InnGrads, InnInverse, InnModel, InputGrad,
    Upstream,
};
pub use permutation::PermutationLayer;
