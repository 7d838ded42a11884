//! Invertible neural networks for morphological inflection, analysis and
//! lemmatization over word-vector spaces.

pub mod embedding;
pub mod error;
pub mod eval;
pub mod flow;
pub mod latent;
pub mod loss;
pub mod morphdata;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
