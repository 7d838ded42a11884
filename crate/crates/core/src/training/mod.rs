//! Bi-directional training of the invertible model, the feedforward
//! baseline, learning-rate plateau decay, early stopping and checkpoints.

mod baseline;
mod config;
mod schedule;

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use baseline::{BaselineModel, BASELINE_DEPTH};
pub(crate) use config::split_setting as config_split_setting;
pub use config::{Alternation, LossSwitches, TrainConfig};
pub use schedule::{plateau_schedule, EarlyStopping, PlateauScheduler};

use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::flow::{InnGrads, InnModel, InputGrad, IoLayout, Task, Upstream};
use crate::latent::{gumbel_softmax_backward, gumbel_softmax_sample, kl_to_uniform_logits, LatentSpec};
use crate::loss::{bce_with_logits, cosine_loss};
use crate::morphdata::{MorphRecord, TagIndex};
use crate::numerics::{clip_gradients, AdamState, DenseVector, MlpGrads, ParamSet};

/// One training pair in vector form. For inflection `x = [lemma; tags]` and
/// `y` is the surface vector; for lemmatization `x` is the surface vector and
/// `y` the lemma vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: DenseVector,
    pub y: DenseVector,
}

/// Resolve every record of `records` to vectors. Tags missing from `index`
/// are dropped; the second value counts them.
pub fn prepare_examples(
    task: Task,
    records: &[MorphRecord],
    table: &EmbeddingTable,
    index: &TagIndex,
) -> Result<(Vec<Example>, usize)> {
    let mut dropped = 0;
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let lemma = table.compose_word_vector(&r.lemma)?;
        let surface = table.compose_word_vector(&r.surface)?;
        out.push(match task {
            Task::Inflection => {
                let (t, d) = index.vector(&r.tags);
                dropped += d;
                let mut x = lemma.into_inner();
                x.extend_from_slice(&t);
                Example {
                    x: DenseVector(x),
                    y: surface,
                }
            }
            Task::Lemmatization => Example { x: surface, y: lemma },
        });
    }
    if dropped > 0 {
        log::warn!("{dropped} tag occurrence(s) are not in the training tag index and were dropped");
    }
    Ok((out, dropped))
}

/// The word the dev metric is scored against.
fn dev_gold(task: Task, r: &MorphRecord) -> &str {
    match task {
        Task::Inflection => &r.surface,
        Task::Lemmatization => &r.lemma,
    }
}

/// Fresh invertible model for `task` over word vectors of `word_dim`.
pub fn build_inn(task: Task, word_dim: usize, tag_count: usize, cfg: &TrainConfig) -> Result<InnModel> {
    let layout = IoLayout::for_task(task, word_dim, tag_count, cfg.latent.as_ref());
    InnModel::new(layout, cfg.blocks, cfg.hidden, cfg.subnet_depth, cfg.seed)
}

pub fn build_baseline(task: Task, word_dim: usize, tag_count: usize, cfg: &TrainConfig) -> BaselineModel {
    let in_dim = match task {
        Task::Inflection => word_dim + tag_count,
        Task::Lemmatization => word_dim,
    };
    BaselineModel::new(task, in_dim, word_dim, cfg.hidden, cfg.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "model")]
pub enum ModelKind {
    Inn(InnModel),
    Baseline(BaselineModel),
}

impl ModelKind {
    pub fn is_baseline(&self) -> bool {
        matches!(self, ModelKind::Baseline(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Inn(_) => "inn",
            ModelKind::Baseline(_) => "baseline",
        }
    }

    /// Forward-direction output vector.
    pub fn predict_y(&self, x: &[f64]) -> Result<DenseVector> {
        match self {
            ModelKind::Inn(m) => Ok(m.predict(x)?.0),
            ModelKind::Baseline(b) => b.predict(x),
        }
    }

    fn grads_like(&self) -> GradStore {
        match self {
            ModelKind::Inn(m) => GradStore::Inn(m.grads_like()),
            ModelKind::Baseline(b) => GradStore::Mlp(b.mlp.grads_like()),
        }
    }
}

impl ParamSet for ModelKind {
    fn tensors(&self) -> Vec<&[f64]> {
        match self {
            ModelKind::Inn(m) => m.tensors(),
            ModelKind::Baseline(b) => b.mlp.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            ModelKind::Inn(m) => m.tensors_mut(),
            ModelKind::Baseline(b) => b.mlp.tensors_mut(),
        }
    }

    fn tensor_names(&self) -> Vec<String> {
        match self {
            ModelKind::Inn(m) => m.tensor_names(),
            ModelKind::Baseline(b) => b.mlp.tensor_names(),
        }
    }
}

enum GradStore {
    Inn(InnGrads),
    Mlp(MlpGrads),
}

impl ParamSet for GradStore {
    fn tensors(&self) -> Vec<&[f64]> {
        match self {
            GradStore::Inn(g) => g.tensors(),
            GradStore::Mlp(g) => g.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            GradStore::Inn(g) => g.tensors_mut(),
            GradStore::Mlp(g) => g.tensors_mut(),
        }
    }

    fn tensor_names(&self) -> Vec<String> {
        match self {
            GradStore::Inn(g) => g.tensor_names(),
            GradStore::Mlp(g) => g.tensor_names(),
        }
    }
}

/// Unweighted loss components of one record (or their epoch means).
/// `y` and `z` come from the forward pass, `x` and `t` from the inverse pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub y: f64,
    pub z: f64,
    pub x: f64,
    pub t: f64,
    pub total: f64,
}

impl LossParts {
    fn add(&mut self, o: &LossParts) {
        self.y += o.y;
        self.z += o.z;
        self.x += o.x;
        self.t += o.t;
        self.total += o.total;
    }

    fn scaled(mut self, f: f64) -> Self {
        self.y *= f;
        self.z *= f;
        self.x *= f;
        self.t *= f;
        self.total *= f;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// One-based epoch number.
    pub epoch: usize,
    pub learning_rate: f64,
    pub tau: f64,
    pub losses: LossParts,
    /// Exact-match percentage on the dev split (surface for inflection,
    /// lemma for lemmatization); negative mean training loss without a dev split.
    pub dev_metric: f64,
    pub improved: bool,
    pub updates: u64,
}

impl EpochRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("epoch records always serialize")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn best_dev(&self) -> Option<f64> {
        self.epochs.iter().map(|e| e.dev_metric).reduce(f64::max)
    }
}

/// Everything needed to continue training after a restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub model: ModelKind,
    pub adam: AdamState,
    pub learning_rate: f64,
    pub scheduler: PlateauScheduler,
    pub early: EarlyStopping,
    pub best_model: Option<ModelKind>,
    pub history: TrainHistory,
    pub epochs_done: usize,
    pub updates: u64,
    pub stopped_early: bool,
    pub finished: bool,
}

const CHECKPOINT_FORMAT: &str = "innmorph-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

/// Model plus the training context it came from. A finished checkpoint is
/// the artifact used for prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub task: Task,
    pub config: TrainConfig,
    pub tag_index: TagIndex,
    pub word_dim: usize,
    /// Embedding file the model was trained against, if known.
    #[serde(default)]
    pub embeddings: Option<String>,
    pub state: TrainState,
}

impl Checkpoint {
    pub fn model(&self) -> &ModelKind {
        &self.state.model
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("unreadable checkpoint: {e}")))?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("not a checkpoint (format `{}`)", c.format)));
        }
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {}", c.version)));
        }
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let check = |m: &ModelKind| -> Result<()> {
            let (x, y) = match m {
                ModelKind::Inn(inn) => {
                    let l = inn.layout();
                    if l.task != self.task || l.tag_count != self.tag_count_for_task() {
                        return Err(Error::Checkpoint("model layout disagrees with the tag index".into()));
                    }
                    (l.x_dim, l.y_dim)
                }
                ModelKind::Baseline(b) => (b.in_dim(), b.out_dim()),
            };
            let expect_x = self.word_dim + self.tag_count_for_task();
            if x != expect_x || y != self.word_dim {
                return Err(Error::Checkpoint("model dimensions disagree with the checkpoint".into()));
            }
            Ok(())
        };
        check(&self.state.model)?;
        if let Some(b) = &self.state.best_model {
            check(b)?;
        }
        if self.state.history.len() != self.state.epochs_done {
            return Err(Error::Checkpoint("history length disagrees with completed epochs".into()));
        }
        Ok(())
    }

    fn tag_count_for_task(&self) -> usize {
        match self.task {
            Task::Inflection => self.tag_index.len(),
            Task::Lemmatization => 0,
        }
    }

    /// Written to a sibling temporary file first, then renamed into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(self.to_json()?.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Architecture to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Inn,
    Baseline,
}

/// Stateful training run over fixed train/dev splits.
pub struct Trainer<'a> {
    checkpoint: Checkpoint,
    table: &'a EmbeddingTable,
    train: Vec<Example>,
    dev_x: Vec<Example>,
    dev_gold: Vec<String>,
}

impl<'a> Trainer<'a> {
    /// New run; the tag index is built from `train`.
    pub fn new(
        task: Task,
        arch: Architecture,
        train: &[MorphRecord],
        dev: &[MorphRecord],
        table: &'a EmbeddingTable,
        cfg: &TrainConfig,
    ) -> Result<Self> {
        let index = TagIndex::build(train);
        let tags = if task == Task::Inflection { index.len() } else { 0 };
        let model = match arch {
            Architecture::Inn => ModelKind::Inn(build_inn(task, table.dim(), tags, cfg)?),
            Architecture::Baseline => ModelKind::Baseline(build_baseline(task, table.dim(), tags, cfg)),
        };
        Self::with_model(task, model, index, train, dev, table, cfg)
    }

    /// New run starting from a given model.
    pub fn with_model(
        task: Task,
        model: ModelKind,
        tag_index: TagIndex,
        train: &[MorphRecord],
        dev: &[MorphRecord],
        table: &'a EmbeddingTable,
        cfg: &TrainConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if train.is_empty() {
            return Err(Error::InvalidInput("training split is empty".into()));
        }
        if task == Task::Inflection && tag_index.is_empty() {
            return Err(Error::InvalidInput("inflection training needs tagged records".into()));
        }
        let adam = AdamState::new(&model, cfg.learning_rate);
        let checkpoint = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            task,
            config: cfg.clone(),
            tag_index,
            word_dim: table.dim(),
            embeddings: None,
            state: TrainState {
                model,
                adam,
                learning_rate: cfg.learning_rate,
                scheduler: PlateauScheduler::new(cfg.plateau_factor, cfg.plateau_patience),
                early: EarlyStopping::new(cfg.early_stop_patience),
                best_model: None,
                history: TrainHistory::default(),
                epochs_done: 0,
                updates: 0,
                stopped_early: false,
                finished: false,
            },
        };
        checkpoint.validate()?;
        Self::resume(checkpoint, train, dev, table)
    }

    /// Continue from a checkpoint with the same data it was started on.
    pub fn resume(
        checkpoint: Checkpoint,
        train: &[MorphRecord],
        dev: &[MorphRecord],
        table: &'a EmbeddingTable,
    ) -> Result<Self> {
        if table.dim() != checkpoint.word_dim {
            return Err(Error::dim("embedding table", checkpoint.word_dim, table.dim()));
        }
        let task = checkpoint.task;
        let (train, _) = prepare_examples(task, train, table, &checkpoint.tag_index)?;
        let (dev_x, _) = prepare_examples(task, dev, table, &checkpoint.tag_index)?;
        let dev_gold = dev.iter().map(|r| dev_gold(task, r).to_string()).collect();
        Ok(Trainer {
            checkpoint,
            table,
            train,
            dev_x,
            dev_gold,
        })
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.checkpoint
    }

    pub fn history(&self) -> &TrainHistory {
        &self.checkpoint.state.history
    }

    pub fn is_finished(&self) -> bool {
        self.checkpoint.state.finished
    }

    /// Run every remaining epoch, then restore the best dev snapshot.
    pub fn train(mut self) -> Result<Checkpoint> {
        while self.run_epoch()?.is_some() {}
        Ok(self.finish())
    }

    /// Run up to `n` more epochs without finalizing.
    pub fn run_epochs(&mut self, n: usize) -> Result<()> {
        for _ in 0..n {
            if self.run_epoch()?.is_none() {
                break;
            }
        }
        Ok(())
    }

    /// Mark the run finished and swap in the best dev snapshot, if any.
    pub fn finish(mut self) -> Checkpoint {
        let s = &mut self.checkpoint.state;
        if !s.finished {
            if let Some(best) = s.best_model.take() {
                s.model = best;
            }
            s.finished = true;
        }
        self.checkpoint
    }

    /// One epoch; `None` when training is already complete or early-stopped.
    pub fn run_epoch(&mut self) -> Result<Option<&EpochRecord>> {
        let cfg = self.checkpoint.config.clone();
        let st = &self.checkpoint.state;
        if st.finished || st.epochs_done >= cfg.epochs {
            return Ok(None);
        }
        if st.stopped_early {
            return Ok(None);
        }
        let epoch = st.epochs_done;
        let tau = cfg.tau_at(epoch);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64 + 1);
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut rng);

        let task = self.checkpoint.task;
        let mut grads = self.checkpoint.state.model.grads_like();
        let mut sums = LossParts::default();
        let mut pending = 0usize;
        let window = cfg.update_size();
        for (step, &i) in order.iter().enumerate() {
            let st = &mut self.checkpoint.state;
            let passes = match cfg.alternation {
                Alternation::Within => Passes::BOTH,
                Alternation::Across if st.updates % 2 == 0 => Passes::FORWARD,
                Alternation::Across => Passes::INVERSE,
            };
            let ex = &self.train[i];
            let parts = match (&st.model, &mut grads) {
                (ModelKind::Inn(m), GradStore::Inn(g)) => inn_record_step(m, task, ex, &cfg, tau, passes, &mut rng, g),
                (ModelKind::Baseline(b), GradStore::Mlp(g)) => baseline_record_step(b, ex, &cfg, g),
                _ => unreachable!("gradient store matches the model"),
            }
            .map_err(|e| Error::Training {
                epoch: epoch + 1,
                step,
                message: e.to_string(),
            })?;
            if !parts.total.is_finite() {
                return Err(Error::Training {
                    epoch: epoch + 1,
                    step,
                    message: format!("non-finite loss {parts:?}"),
                });
            }
            sums.add(&parts);
            pending += 1;
            if pending == window || step + 1 == order.len() {
                self.apply_update(&mut grads, pending, epoch, step)?;
                pending = 0;
            }
        }

        let mean = sums.scaled(1.0 / self.train.len() as f64);
        let metric = if self.dev_x.is_empty() {
            -mean.total
        } else {
            dev_exact_match(&self.checkpoint.state.model, &self.dev_x, &self.dev_gold, self.table)?
        };
        let st = &mut self.checkpoint.state;
        let lr_used = st.learning_rate;
        let improved = st.early.observe(epoch, metric);
        if improved {
            st.best_model = Some(st.model.clone());
        }
        st.learning_rate = st.scheduler.observe(metric, st.learning_rate);
        st.history.epochs.push(EpochRecord {
            epoch: epoch + 1,
            learning_rate: lr_used,
            tau,
            losses: mean,
            dev_metric: metric,
            improved,
            updates: st.updates,
        });
        st.epochs_done += 1;
        if st.early.should_stop(epoch) {
            log::info!("early stop after epoch {}", epoch + 1);
            st.stopped_early = true;
        }
        let st = &self.checkpoint.state;
        log::info!(
            "epoch {} loss {:.5} dev {:.2} lr {:.2e}",
            epoch + 1,
            mean.total,
            metric,
            lr_used
        );
        Ok(st.history.epochs.last())
    }

    fn apply_update(&mut self, grads: &mut GradStore, count: usize, epoch: usize, step: usize) -> Result<()> {
        let st = &mut self.checkpoint.state;
        grads.scale(1.0 / count as f64);
        clip_gradients(grads, self.checkpoint.config.clip_norm);
        st.adam.learning_rate = st.learning_rate;
        st.adam.step(&mut st.model, grads).map_err(|e| Error::Training {
            epoch: epoch + 1,
            step,
            message: e.to_string(),
        })?;
        st.updates += 1;
        grads.fill_zero();
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Passes {
    forward: bool,
    inverse: bool,
}

impl Passes {
    const BOTH: Passes = Passes {
        forward: true,
        inverse: true,
    };
    const FORWARD: Passes = Passes {
        forward: true,
        inverse: false,
    };
    const INVERSE: Passes = Passes {
        forward: false,
        inverse: true,
    };
}

/// Loss and accumulated gradients of one record: forward pass `x → [y', z']`
/// scored against `y` (and `z'` against the uniform prior), then the inverse
/// pass from the gold `y` and a Gumbel-Softmax sample of `z'` scored against `x`.
#[allow(clippy::too_many_arguments)]
fn inn_record_step(
    model: &InnModel,
    task: Task,
    ex: &Example,
    cfg: &TrainConfig,
    tau: f64,
    passes: Passes,
    rng: &mut ChaCha8Rng,
    grads: &mut InnGrads,
) -> Result<LossParts> {
    let w = &cfg.weights;
    let sw = &cfg.switches;
    let layout = model.layout();
    let latent: Option<LatentSpec> = layout.latent(tau);
    let inverse_active = passes.inverse
        && match task {
            Task::Inflection => sw.use_lx || sw.use_lt,
            Task::Lemmatization => sw.use_lx,
        };

    let fwd = model.forward(&ex.x)?;
    let mut parts = LossParts::default();
    let mut up_y = vec![0.0; layout.y_dim];
    let mut up_z = vec![0.0; layout.z_len()];
    if passes.forward {
        let (ly, gy) = cosine_loss(&fwd.y, &ex.y)?;
        parts.y = ly;
        parts.total += w.alpha_y * ly;
        up_y.iter_mut().zip(gy.iter()).for_each(|(u, g)| *u = w.alpha_y * g);
        if let (true, Some(spec)) = (sw.use_lz, &latent) {
            let (lz, gz) = kl_to_uniform_logits(&fwd.z_logits, spec)?;
            parts.z = lz;
            parts.total += w.alpha_z * lz;
            up_z.iter_mut().zip(gz.iter()).for_each(|(u, g)| *u = w.alpha_z * g);
        }
    }

    if inverse_active {
        let z = match &latent {
            Some(spec) => gumbel_softmax_sample(&fwd.z_logits, spec, rng)?,
            None => DenseVector::zeros(0),
        };
        let inv = model.inverse(&ex.y, &z)?;
        let mut up_x = vec![0.0; layout.x_dim];
        match task {
            Task::Inflection => {
                let wd = layout.word_dim;
                if sw.use_lx {
                    let (l, g) = cosine_loss(&inv.x[..wd], &ex.x[..wd])?;
                    parts.x = l;
                    parts.total += w.alpha_x * l;
                    up_x[..wd].iter_mut().zip(g.iter()).for_each(|(u, g)| *u = w.alpha_x * g);
                }
                if sw.use_lt {
                    let (l, g) = bce_with_logits(&inv.x[wd..], &ex.x[wd..])?;
                    parts.t = l;
                    parts.total += w.alpha_t * l;
                    up_x[wd..].iter_mut().zip(g.iter()).for_each(|(u, g)| *u = w.alpha_t * g);
                }
            }
            Task::Lemmatization => {
                let (l, g) = cosine_loss(&inv.x, &ex.x)?;
                parts.x = l;
                parts.total += w.alpha_x * l;
                up_x.iter_mut().zip(g.iter()).for_each(|(u, g)| *u = w.alpha_x * g);
            }
        }
        let dz = match model.backward(&inv.cache, Upstream::Inverse { x: &up_x }, grads)? {
            InputGrad::Inverse { z, .. } => z,
            InputGrad::Forward { .. } => unreachable!("inverse cache yields inverse gradients"),
        };
        if let Some(spec) = &latent {
            // Reparameterized path from the sample back into the forward z-logits.
            let dlogits = gumbel_softmax_backward(&z, &dz, spec)?;
            up_z.iter_mut().zip(dlogits.iter()).for_each(|(u, g)| *u += g);
        }
    }

    if up_y.iter().chain(&up_z).any(|&g| g != 0.0) {
        model.backward(&fwd.cache, Upstream::Forward { y: &up_y, z: &up_z }, grads)?;
    }
    Ok(parts)
}

fn baseline_record_step(model: &BaselineModel, ex: &Example, cfg: &TrainConfig, grads: &mut MlpGrads) -> Result<LossParts> {
    let (out, cache) = model.mlp.forward(&ex.x)?;
    let (ly, gy) = cosine_loss(&out, &ex.y)?;
    let alpha = cfg.weights.alpha_y;
    let up: Vec<f64> = gy.iter().map(|g| alpha * g).collect();
    model.mlp.backward_accumulate(&cache, &up, grads)?;
    Ok(LossParts {
        y: ly,
        total: alpha * ly,
        ..Default::default()
    })
}

/// Exact-match percentage of forward-direction decodes.
pub fn dev_exact_match(model: &ModelKind, examples: &[Example], gold: &[String], table: &EmbeddingTable) -> Result<f64> {
    if examples.len() != gold.len() {
        return Err(Error::dim("dev gold", examples.len(), gold.len()));
    }
    if examples.is_empty() {
        return Err(Error::InvalidInput("no dev examples".into()));
    }
    let hits = examples
        .par_iter()
        .zip(gold)
        .map(|(ex, g)| -> Result<usize> {
            let y = model.predict_y(&ex.x)?;
            Ok(usize::from(table.nearest_word(&y, 1)?[0].token == *g))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(100.0 * hits.iter().sum::<usize>() as f64 / examples.len() as f64)
}

/// Train an inflection model in place; tags are indexed from `train`.
pub fn train_inflection(
    model: InnModel,
    train: &[MorphRecord],
    dev: &[MorphRecord],
    table: &EmbeddingTable,
    cfg: &TrainConfig,
) -> Result<(InnModel, TrainHistory)> {
    train_inn(Task::Inflection, model, train, dev, table, cfg)
}

pub fn train_lemmatization(
    model: InnModel,
    train: &[MorphRecord],
    dev: &[MorphRecord],
    table: &EmbeddingTable,
    cfg: &TrainConfig,
) -> Result<(InnModel, TrainHistory)> {
    train_inn(Task::Lemmatization, model, train, dev, table, cfg)
}

fn train_inn(
    task: Task,
    model: InnModel,
    train: &[MorphRecord],
    dev: &[MorphRecord],
    table: &EmbeddingTable,
    cfg: &TrainConfig,
) -> Result<(InnModel, TrainHistory)> {
    if model.layout().task != task {
        return Err(Error::InvalidInput(format!("model was built for {}", model.layout().task)));
    }
    let index = TagIndex::build(train);
    let done = Trainer::with_model(task, ModelKind::Inn(model), index, train, dev, table, cfg)?.train()?;
    match done.state.model {
        ModelKind::Inn(m) => Ok((m, done.state.history)),
        ModelKind::Baseline(_) => unreachable!("architecture is fixed for a run"),
    }
}

pub fn train_baseline(
    task: Task,
    train: &[MorphRecord],
    dev: &[MorphRecord],
    table: &EmbeddingTable,
    cfg: &TrainConfig,
) -> Result<(BaselineModel, TrainHistory)> {
    let done = Trainer::new(task, Architecture::Baseline, train, dev, table, cfg)?.train()?;
    match done.state.model {
        ModelKind::Baseline(b) => Ok((b, done.state.history)),
        ModelKind::Inn(_) => unreachable!("architecture is fixed for a run"),
    }
}

/// Build, train and finalize in one call.
pub fn fit(
    task: Task,
    arch: Architecture,
    train: &[MorphRecord],
    dev: &[MorphRecord],
    table: &EmbeddingTable,
    cfg: &TrainConfig,
) -> Result<Checkpoint> {
    Trainer::new(task, arch, train, dev, table, cfg)?.train()
}

#[cfg(test)]
mod tests;
