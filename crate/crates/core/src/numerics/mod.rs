//! Dense linear algebra, MLP subnetworks with hand-written gradients,
//! Adam, gradient clipping and a finite-difference oracle.

mod gradcheck;
mod linalg;
mod mlp;
mod optim;
mod params;

pub use gradcheck::{finite_difference_grad, max_relative_error};
pub use linalg::{dot, norm, orthogonal_init, DenseMatrix, DenseVector};
pub use mlp::{Activation, Dense, Mlp, MlpCache, MlpGrads};
pub use optim::AdamState;
pub use params::{clip_gradients, ParamSet, TensorList};
