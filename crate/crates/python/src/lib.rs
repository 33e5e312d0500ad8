//! Python bindings: name normalization, vector and metric helpers, the
//! demo corpus writer, trained classifiers and the staged pipeline.

use std::path::{Path, PathBuf};

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use findr::classifier::{self, CoupledClassifier};
use findr::demo::{write_demo as core_write_demo, DemoSpec};
use findr::evaluation::{self, ContingencyTable};
use findr::inference::{self, IngestionMode};
use findr::pipeline::{self, Session as CoreSession};
use findr::{discovery, Embedding, FindrError};

create_exception!(findr_py, FindrException, PyException);
create_exception!(findr_py, UsageError, FindrException);
create_exception!(findr_py, EmptyVocabularyError, FindrException);
create_exception!(findr_py, ProviderError, FindrException);

fn to_py(e: FindrError) -> PyErr {
    let msg = e.to_string();
    match e.exit_code() {
        2 => UsageError::new_err(msg),
        3 => EmptyVocabularyError::new_err(msg),
        4 => ProviderError::new_err(msg),
        _ => FindrException::new_err(msg),
    }
}

fn embedding(values: Vec<f32>) -> PyResult<Embedding> {
    Embedding::new(values).map_err(to_py)
}

fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| to_py(e.into()))?;
    let json = py.import("json")?;
    Ok(json.call_method1("loads", (text,))?.unbind())
}

/// Canonical form of a class name, or None when nothing usable remains.
#[pyfunction]
fn normalize_name(name: &str) -> Option<String> {
    discovery::normalize_name(name)
}

#[pyfunction]
fn cosine(a: Vec<f32>, b: Vec<f32>) -> PyResult<f64> {
    findr::cosine(&embedding(a)?, &embedding(b)?).map_err(to_py)
}

/// `alpha * t + (1 - alpha) * v`, L2-normalized. Without `v` the text prototype is returned.
#[pyfunction]
#[pyo3(signature = (t, v, alpha = classifier::DEFAULT_ALPHA))]
fn couple(t: Vec<f32>, v: Option<Vec<f32>>, alpha: f64) -> PyResult<Vec<f32>> {
    let t = embedding(t)?;
    let v = v.map(embedding).transpose()?;
    Ok(classifier::couple(&t, v.as_ref(), alpha).map_err(to_py)?.into_values())
}

/// Maximum-weight one-to-one matching of rows to columns: `(total, column per row)`.
#[pyfunction]
fn max_weight_assignment(counts: Vec<Vec<u64>>) -> PyResult<(u64, Vec<Option<usize>>)> {
    if counts.iter().any(|r| r.len() != counts.first().map_or(0, Vec::len)) {
        return Err(UsageError::new_err("rows differ in length"));
    }
    Ok(evaluation::max_weight_assignment(&counts))
}

/// Clustering accuracy of predicted labels against ground truth, plus the
/// matched (predicted, ground-truth) pairs.
#[pyfunction]
fn clustering_accuracy(predicted: Vec<String>, truth: Vec<String>) -> PyResult<(f64, Vec<(String, String)>)> {
    let table = ContingencyTable::from_labels(&predicted, &truth).map_err(to_py)?;
    let c = evaluation::clustering_accuracy(&table).map_err(to_py)?;
    let pairs = c
        .mapping
        .iter()
        .map(|&(r, col)| (table.rows[r].clone(), table.cols[col].clone()))
        .collect();
    Ok((c.cacc, pairs))
}

/// Writes a synthetic flower corpus with a recorded chat session and
/// returns the paths of its manifests and config.
#[pyfunction]
#[pyo3(signature = (out, classes = 10, disc_per_class = 3, test_per_class = 10, noise = 0.05))]
fn write_demo<'py>(
    py: Python<'py>,
    out: PathBuf,
    classes: usize,
    disc_per_class: usize,
    test_per_class: usize,
    noise: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let mut spec = DemoSpec::flowers(classes);
    spec.disc_per_class = disc_per_class;
    spec.test_per_class = test_per_class;
    spec.noise = noise;
    let corpus = core_write_demo(&spec, &out).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("root", corpus.root)?;
    d.set_item("disc", corpus.disc_manifest)?;
    d.set_item("test", corpus.test_manifest)?;
    d.set_item("config", corpus.config_path)?;
    d.set_item("session", corpus.session_path)?;
    Ok(d)
}

/// A coupled classifier as stored in `classifier.json`.
#[pyclass(frozen)]
struct Classifier {
    inner: CoupledClassifier,
}

#[pymethods]
impl Classifier {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let bytes = std::fs::read(&path).map_err(|e| to_py(FindrError::io(&path, e)))?;
        let inner: CoupledClassifier = serde_json::from_slice(&bytes).map_err(|e| to_py(e.into()))?;
        inner.validate().map_err(to_py)?;
        Ok(Classifier { inner })
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.names.clone()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Same prototypes recoupled at another alpha.
    fn with_alpha(&self, alpha: f64) -> PyResult<Self> {
        Ok(Classifier {
            inner: self.inner.with_alpha(alpha).map_err(to_py)?,
        })
    }

    /// `(name, score, runner_up)` for one image embedding; `runner_up` is
    /// `(name, score)` or None for a single-class vocabulary.
    fn classify(&self, query: Vec<f32>) -> PyResult<(String, f64, Option<(String, f64)>)> {
        let c = inference::classify_embedding("query", &embedding(query)?, &self.inner).map_err(to_py)?;
        let p = c.prediction;
        Ok((p.name, p.score, p.runner_up.map(|r| (r.name, r.score))))
    }

    fn __repr__(&self) -> String {
        format!("Classifier(classes={}, dim={}, alpha={})", self.inner.len(), self.inner.dim(), self.inner.alpha)
    }
}

/// An open run directory. Holds the run lock until `close()` or collection.
#[pyclass(unsendable)]
struct Session {
    inner: Option<CoreSession>,
    root: PathBuf,
}

impl Session {
    fn get(&self) -> PyResult<&CoreSession> {
        self.inner
            .as_ref()
            .ok_or_else(|| UsageError::new_err("session is closed"))
    }

    fn stage(
        &self,
        py: Python<'_>,
        f: impl FnOnce(&CoreSession) -> findr::Result<serde_json::Value>,
    ) -> PyResult<Py<PyAny>> {
        let summary = f(self.get()?).map_err(to_py)?;
        json_to_py(py, &summary)
    }
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (run_dir, config = None))]
    fn new(run_dir: PathBuf, config: Option<PathBuf>) -> PyResult<Self> {
        let inner = CoreSession::open(&run_dir, config.as_deref(), |_| {}).map_err(to_py)?;
        Ok(Session {
            inner: Some(inner),
            root: run_dir,
        })
    }

    #[getter]
    fn run_dir(&self) -> PathBuf {
        self.root.clone()
    }

    fn discover(&self, py: Python<'_>, images: PathBuf) -> PyResult<Py<PyAny>> {
        self.stage(py, |s| pipeline::discover(s, &images))
    }

    fn refine(&self, py: Python<'_>, images: PathBuf) -> PyResult<Py<PyAny>> {
        self.stage(py, |s| pipeline::refine_stage(s, &images))
    }

    fn build(&self, py: Python<'_>, images: PathBuf) -> PyResult<Py<PyAny>> {
        self.stage(py, |s| pipeline::build(s, &images))
    }

    #[pyo3(signature = (images, lenient = false))]
    fn classify(&self, py: Python<'_>, images: PathBuf, lenient: bool) -> PyResult<Py<PyAny>> {
        let mode = lenient.then_some(IngestionMode::Lenient);
        self.stage(py, |s| pipeline::classify(s, &images, mode))
    }

    fn evaluate(&self, py: Python<'_>, labels: PathBuf) -> PyResult<Py<PyAny>> {
        self.stage(py, |s| pipeline::evaluate_stage(s, &labels))
    }

    #[pyo3(signature = (images, start = 0.0, stop = 1.0, step = 0.1))]
    fn ablate_alpha(&self, py: Python<'_>, images: PathBuf, start: f64, stop: f64, step: f64) -> PyResult<Py<PyAny>> {
        let grid = evaluation::alpha_grid(start, stop, step).map_err(to_py)?;
        self.stage(py, |s| pipeline::ablate_alpha(s, &images, &grid))
    }

    fn ablate_robustness(&self, py: Python<'_>, disc: PathBuf, test: PathBuf) -> PyResult<Py<PyAny>> {
        self.stage(py, |s| pipeline::ablate_robustness(s, &disc, &test))
    }

    /// The classifier written by `build`.
    fn classifier(&self) -> PyResult<Classifier> {
        Classifier::load(Path::new(&self.root).join("classifier.json"))
    }

    /// Releases the run lock.
    fn close(&mut self) {
        self.inner = None;
    }

    fn __enter__(slf: Py<Self>) -> Py<Self> {
        slf
    }

    fn __exit__(&mut self, _ty: Py<PyAny>, _value: Py<PyAny>, _tb: Py<PyAny>) -> bool {
        self.close();
        false
    }
}

#[pymodule]
pub fn findr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("FindrError", py.get_type::<FindrException>())?;
    m.add("UsageError", py.get_type::<UsageError>())?;
    m.add("EmptyVocabularyError", py.get_type::<EmptyVocabularyError>())?;
    m.add("ProviderError", py.get_type::<ProviderError>())?;
    m.add("DEFAULT_ALPHA", classifier::DEFAULT_ALPHA)?;
    m.add_function(wrap_pyfunction!(normalize_name, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(couple, m)?)?;
    m.add_function(wrap_pyfunction!(max_weight_assignment, m)?)?;
    m.add_function(wrap_pyfunction!(clustering_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(write_demo, m)?)?;
    m.add_class::<Classifier>()?;
    m.add_class::<Session>()?;
    Ok(())
}
