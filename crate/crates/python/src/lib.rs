//! Python bindings: embedding tables, toy data, training, the prediction
//! pipelines, metrics and the raw invertible network.

use std::fs::File;
use std::io::{BufReader, BufWriter};

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use innmorph::eval::{self, Averaging, ZMode};
use innmorph::flow::{InnModel, IoLayout, Task};
use innmorph::morphdata::{self, MorphRecord, TagSet, ToyLangConfig};
use innmorph::training::{self, Architecture, ModelKind, TrainConfig};

/// `(lemma, surface, tags)` as seen from Python.
type PyRecord = (String, String, Vec<String>);

fn to_py_err(e: innmorph::Error) -> PyErr {
    match e.category() {
        "io" => PyOSError::new_err(e.to_string()),
        "training" | "contract" => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_records(rows: Vec<PyRecord>) -> Vec<MorphRecord> {
    rows.into_iter()
        .map(|(lemma, surface, tags)| MorphRecord::new(lemma, surface, tags))
        .collect()
}

fn from_records(records: &[MorphRecord]) -> Vec<PyRecord> {
    records
        .iter()
        .map(|r| (r.lemma.clone(), r.surface.clone(), r.tags.iter().cloned().collect()))
        .collect()
}

fn parse_task(task: &str) -> PyResult<Task> {
    task.parse()
        .map_err(|_| PyValueError::new_err(format!("unknown task `{task}`")))
}

/// Word vectors with exact cosine nearest-neighbour search.
#[pyclass(name = "EmbeddingTable", module = "innmorph_py")]
pub struct PyEmbeddingTable {
    inner: innmorph::embedding::EmbeddingTable,
}

#[pymethods]
impl PyEmbeddingTable {
    #[new]
    fn new(dim: usize) -> Self {
        PyEmbeddingTable {
            inner: innmorph::embedding::EmbeddingTable::new(dim),
        }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let file = File::open(path).map_err(|e| to_py_err(e.into()))?;
        let inner = innmorph::embedding::EmbeddingTable::load(BufReader::new(file)).map_err(to_py_err)?;
        Ok(PyEmbeddingTable { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let file = File::create(path).map_err(|e| to_py_err(e.into()))?;
        self.inner.save(BufWriter::new(file)).map_err(to_py_err)
    }

    fn insert(&mut self, token: String, vector: Vec<f64>) -> PyResult<()> {
        self.inner.insert(token, &vector).map_err(to_py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __contains__(&self, token: &str) -> bool {
        self.inner.contains(token)
    }

    /// Vector of a word, composed from subwords when it is not stored whole.
    fn vector(&self, word: &str) -> PyResult<Vec<f64>> {
        Ok(self.inner.compose_word_vector(word).map_err(to_py_err)?.into_inner())
    }

    #[pyo3(signature = (query, k = 1))]
    fn nearest(&self, query: Vec<f64>, k: usize) -> PyResult<Vec<(String, f64)>> {
        Ok(self
            .inner
            .nearest_word(&query, k)
            .map_err(to_py_err)?
            .into_iter()
            .map(|n| (n.token, n.similarity))
            .collect())
    }
}

/// A trained model together with its settings and tag inventory.
#[pyclass(name = "Model", module = "innmorph_py")]
pub struct PyModel {
    inner: training::Checkpoint,
}

impl PyModel {
    fn inn(&self) -> PyResult<&InnModel> {
        match self.inner.model() {
            ModelKind::Inn(m) => Ok(m),
            ModelKind::Baseline(_) => Err(PyValueError::new_err("this operation needs an invertible model")),
        }
    }
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyModel {
            inner: training::Checkpoint::load(path.as_ref()).map_err(to_py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path.as_ref()).map_err(to_py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py_err)
    }

    #[getter]
    fn task(&self) -> String {
        self.inner.task.to_string()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.model().name()
    }

    #[getter]
    fn epochs(&self) -> usize {
        self.inner.state.epochs_done
    }

    #[getter]
    fn tags(&self) -> Vec<String> {
        self.inner.tag_index.tags().to_vec()
    }

    fn inflect(&self, lemma: &str, tags: Vec<String>, table: &PyEmbeddingTable) -> PyResult<String> {
        let tags: TagSet = tags.into_iter().collect();
        let x = eval::inflection_input(lemma, &tags, &table.inner, &self.inner.tag_index).map_err(to_py_err)?;
        let y = self.inner.model().predict_y(&x).map_err(to_py_err)?;
        Ok(table.inner.nearest_word(&y, 1).map_err(to_py_err)?.swap_remove(0).token)
    }

    /// `(lemma, tags)` for a surface form. The default reads the most
    /// likely latent setting; `sample=True` draws one instead.
    #[pyo3(signature = (surface, table, sample = false, tau = 1.0, seed = 0))]
    fn analyze(
        &self,
        surface: &str,
        table: &PyEmbeddingTable,
        sample: bool,
        tau: f64,
        seed: u64,
    ) -> PyResult<(String, Vec<String>)> {
        let mode = if sample { ZMode::Sampled { tau, seed } } else { ZMode::Hardened };
        let a = eval::predict_analysis(self.inn()?, surface, &table.inner, &self.inner.tag_index, mode)
            .map_err(to_py_err)?;
        Ok((a.lemma, a.tags.into_iter().collect()))
    }

    fn lemmatize(&self, surface: &str, table: &PyEmbeddingTable) -> PyResult<String> {
        let x = table.inner.compose_word_vector(surface).map_err(to_py_err)?;
        let y = self.inner.model().predict_y(&x).map_err(to_py_err)?;
        Ok(table.inner.nearest_word(&y, 1).map_err(to_py_err)?.swap_remove(0).token)
    }

    #[pyo3(signature = (lemma, table, n = 10, tau = 1.0, seed = 0))]
    fn sample_surfaces(&self, lemma: &str, table: &PyEmbeddingTable, n: usize, tau: f64, seed: u64) -> PyResult<Vec<String>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        eval::sample_surfaces(self.inn()?, lemma, n, tau, &mut rng, &table.inner).map_err(to_py_err)
    }

    /// Scores as a dict; metrics the model cannot produce are `None`.
    #[pyo3(signature = (records, table, macro_f1 = false))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        records: Vec<PyRecord>,
        table: &PyEmbeddingTable,
        macro_f1: bool,
    ) -> PyResult<Bound<'py, PyDict>> {
        let averaging = if macro_f1 { Averaging::Macro } else { Averaging::Micro };
        let (r, _) = eval::evaluate_detailed(&self.inner, &to_records(records), &table.inner, averaging)
            .map_err(to_py_err)?;
        let d = PyDict::new(py);
        d.set_item("task", r.task.to_string())?;
        d.set_item("model", r.model)?;
        d.set_item("lemma_em", r.lemma_em)?;
        d.set_item("tag_f1", r.tag_f1)?;
        d.set_item("surface_em", r.surface_em)?;
        d.set_item("count", r.count)?;
        d.set_item("unknown_tags", r.unknown_tags)?;
        d.set_item("config", r.config_fingerprint)?;
        Ok(d)
    }
}

/// A bare invertible network over explicit input and output widths.
#[pyclass(name = "Inn", module = "innmorph_py")]
pub struct PyInn {
    inner: InnModel,
}

#[pymethods]
impl PyInn {
    #[new]
    #[pyo3(signature = (x_dim, y_dim, z_dim = 0, z_cat = 0, blocks = 3, hidden = 128, depth = 2, seed = 1))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        x_dim: usize,
        y_dim: usize,
        z_dim: usize,
        z_cat: usize,
        blocks: usize,
        hidden: usize,
        depth: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let layout = IoLayout::raw(x_dim, y_dim, z_dim, z_cat);
        Ok(PyInn {
            inner: InnModel::new(layout, blocks, hidden, depth, seed).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    /// `(y, z_logits, log|det J|)`.
    fn forward(&self, x: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
        let (y, z, logdet) = self.inner.predict(&x).map_err(to_py_err)?;
        Ok((y.into_inner(), z.into_inner(), logdet))
    }

    #[pyo3(signature = (y, z = Vec::new()))]
    fn inverse(&self, y: Vec<f64>, z: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.reconstruct(&y, &z).map_err(to_py_err)?.into_inner())
    }
}

#[pyfunction]
#[pyo3(signature = (lemmas = 200, slots = 3, tags_per_slot = 2, dim = 100, seed = 1))]
fn generate_toy(
    lemmas: usize,
    slots: usize,
    tags_per_slot: usize,
    dim: usize,
    seed: u64,
) -> PyResult<(Vec<PyRecord>, PyEmbeddingTable)> {
    let (records, table) = morphdata::generate_toy_language(&ToyLangConfig {
        lemma_count: lemmas,
        suffix_slots: slots,
        tags_per_slot,
        embedding_dim: dim,
        seed,
    })
    .map_err(to_py_err)?;
    Ok((from_records(&records), PyEmbeddingTable { inner: table }))
}

#[pyfunction]
fn read_dataset(path: &str) -> PyResult<Vec<PyRecord>> {
    let file = File::open(path).map_err(|e| to_py_err(e.into()))?;
    Ok(from_records(&morphdata::parse_dataset(BufReader::new(file)).map_err(to_py_err)?))
}

#[pyfunction]
fn write_dataset(path: &str, records: Vec<PyRecord>) -> PyResult<()> {
    let file = File::create(path).map_err(|e| to_py_err(e.into()))?;
    morphdata::write_dataset(&to_records(records), BufWriter::new(file)).map_err(to_py_err)
}

/// 80/10/10 split into `(train, dev, test)`.
#[pyfunction]
#[pyo3(signature = (records, seed = 1))]
#[allow(clippy::type_complexity)]
fn split(records: Vec<PyRecord>, seed: u64) -> PyResult<(Vec<PyRecord>, Vec<PyRecord>, Vec<PyRecord>)> {
    let (a, b, c) = morphdata::split_dataset(&to_records(records), (0.8, 0.1, 0.1), seed).map_err(to_py_err)?;
    Ok((from_records(&a), from_records(&b), from_records(&c)))
}

/// Train a model. `config` uses the same `key = value` lines as the
/// command-line config file.
#[pyfunction]
#[pyo3(signature = (task, train, dev, table, config = "", arch = "inn"))]
fn train(
    task: &str,
    train: Vec<PyRecord>,
    dev: Vec<PyRecord>,
    table: &PyEmbeddingTable,
    config: &str,
    arch: &str,
) -> PyResult<PyModel> {
    let cfg = TrainConfig::parse(config).map_err(to_py_err)?;
    let arch = match arch {
        "inn" => Architecture::Inn,
        "baseline" => Architecture::Baseline,
        other => return Err(PyValueError::new_err(format!("unknown architecture `{other}`"))),
    };
    let ckpt = training::fit(
        parse_task(task)?,
        arch,
        &to_records(train),
        &to_records(dev),
        &table.inner,
        &cfg,
    )
    .map_err(to_py_err)?;
    Ok(PyModel { inner: ckpt })
}

#[pyfunction]
fn exact_match(predictions: Vec<String>, golds: Vec<String>) -> PyResult<f64> {
    eval::exact_match(&predictions, &golds).map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (predictions, golds, macro_f1 = false))]
fn tag_f1(predictions: Vec<Vec<String>>, golds: Vec<Vec<String>>, macro_f1: bool) -> PyResult<f64> {
    let sets = |v: Vec<Vec<String>>| -> Vec<TagSet> { v.into_iter().map(|s| s.into_iter().collect()).collect() };
    let averaging = if macro_f1 { Averaging::Macro } else { Averaging::Micro };
    eval::tag_f1(&sets(predictions), &sets(golds), averaging).map_err(to_py_err)
}

#[pymodule]
fn innmorph_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEmbeddingTable>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyInn>()?;
    m.add_function(wrap_pyfunction!(generate_toy, m)?)?;
    m.add_function(wrap_pyfunction!(read_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(write_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(split, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(exact_match, m)?)?;
    m.add_function(wrap_pyfunction!(tag_f1, m)?)?;
    Ok(())
}
