use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::flow::{InnModel, Task};
use crate::latent::{gumbel_softmax_sample, harden, LatentSpec};
use crate::loss::sigmoid;
use crate::morphdata::{TagIndex, TagSet};
use crate::numerics::DenseVector;

/// How `z` is chosen when running the model backwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZMode {
    /// Start from the uniform `z`, reconstruct, read the forward pass's own
    /// z-logits for that reconstruction and harden them to one-hot.
    Hardened,
    /// Gumbel-Softmax draw from the uniform prior at temperature `tau`.
    Sampled { tau: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Analysis {
    pub lemma: String,
    pub tags: TagSet,
}

fn require_task(model: &InnModel, task: Task) -> Result<()> {
    if model.layout().task != task {
        return Err(Error::InvalidInput(format!(
            "operation needs a {task} model, got a {} model",
            model.layout().task
        )));
    }
    Ok(())
}

fn nearest(table: &EmbeddingTable, v: &[f64]) -> Result<String> {
    Ok(table.nearest_word(v, 1)?.swap_remove(0).token)
}

/// `[lemma; t]` input for inflection.
pub fn inflection_input(lemma: &str, tags: &TagSet, table: &EmbeddingTable, index: &TagIndex) -> Result<DenseVector> {
    let mut x = table.compose_word_vector(lemma)?.into_inner();
    x.extend_from_slice(&index.vector(tags).0);
    Ok(DenseVector(x))
}

pub fn predict_inflection(
    model: &InnModel,
    lemma: &str,
    tags: &TagSet,
    table: &EmbeddingTable,
    index: &TagIndex,
) -> Result<String> {
    require_task(model, Task::Inflection)?;
    let x = inflection_input(lemma, tags, table, index)?;
    let (y, _, _) = model.predict(&x)?;
    nearest(table, &y)
}

fn uniform_z(spec: &LatentSpec) -> Vec<f64> {
    vec![1.0 / spec.cat as f64; spec.len()]
}

/// `z` for an inverse pass from `y`.
pub fn choose_z(model: &InnModel, y: &[f64], mode: ZMode) -> Result<DenseVector> {
    let Some(spec) = model.layout().latent(1.0) else {
        return Ok(DenseVector::zeros(0));
    };
    match mode {
        ZMode::Hardened => {
            let x0 = model.reconstruct(y, &uniform_z(&spec))?;
            let (_, logits, _) = model.predict(&x0)?;
            harden(&logits, &spec)
        }
        ZMode::Sampled { tau, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            gumbel_softmax_sample(&vec![0.0; spec.len()], &spec.with_tau(tau), &mut rng)
        }
    }
}

/// Lemma and tag set of a surface form, by running the model backwards.
pub fn predict_analysis(
    model: &InnModel,
    surface: &str,
    table: &EmbeddingTable,
    index: &TagIndex,
    mode: ZMode,
) -> Result<Analysis> {
    require_task(model, Task::Inflection)?;
    let y = table.compose_word_vector(surface)?;
    let z = choose_z(model, &y, mode)?;
    let x = model.reconstruct(&y, &z)?;
    let wd = model.layout().word_dim;
    Ok(Analysis {
        lemma: nearest(table, &x[..wd])?,
        tags: index.decode(&x[wd..], |v| sigmoid(v) > 0.5),
    })
}

pub fn predict_lemma(model: &InnModel, surface: &str, table: &EmbeddingTable) -> Result<String> {
    require_task(model, Task::Lemmatization)?;
    let x = table.compose_word_vector(surface)?;
    let (y, _, _) = model.predict(&x)?;
    nearest(table, &y)
}

/// `n` surface forms generated from `lemma`, each from an independent
/// Gumbel-Softmax draw of `z` from the uniform prior.
pub fn sample_surfaces<R: Rng + ?Sized>(
    model: &InnModel,
    lemma: &str,
    n: usize,
    tau: f64,
    rng: &mut R,
    table: &EmbeddingTable,
) -> Result<Vec<String>> {
    let logits = vec![0.0; model.layout().z_len()];
    sample_surfaces_with_logits(model, lemma, &logits, n, tau, rng, table)
}

/// As [`sample_surfaces`], drawing `z` around the given logits.
pub fn sample_surfaces_with_logits<R: Rng + ?Sized>(
    model: &InnModel,
    lemma: &str,
    logits: &[f64],
    n: usize,
    tau: f64,
    rng: &mut R,
    table: &EmbeddingTable,
) -> Result<Vec<String>> {
    require_task(model, Task::Lemmatization)?;
    let y = table.compose_word_vector(lemma)?;
    let spec = model.layout().latent(tau);
    if let Some(s) = &spec {
        s.validate()?;
        if logits.len() != s.len() {
            return Err(Error::dim("latent logits", s.len(), logits.len()));
        }
    }
    (0..n)
        .map(|_| {
            let z = match &spec {
                Some(s) => gumbel_softmax_sample(logits, s, rng)?,
                None => DenseVector::zeros(0),
            };
            nearest(table, &model.reconstruct(&y, &z)?)
        })
        .collect()
}

/// Number of distinct strings in `samples`.
pub fn distinct_count(samples: &[String]) -> usize {
    samples.iter().collect::<std::collections::HashSet<_>>().len()
}
