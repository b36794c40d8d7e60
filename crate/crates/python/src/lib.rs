//! Python bindings for the dptext toolkit.
//!
//! Exposes the cleaning pipeline, featurization, the privacy mechanism,
//! training, and metrics as an extension module. Build the cdylib with
//! `cargo build -p dptext-python --release` and import it as `dptext`
//! (see `python/smoke_test.py` at the repository root).

use std::collections::HashMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dptext_core::corpus::{read_checkpoint, read_vocabulary, write_checkpoint, write_vocabulary};
use dptext_core::features::{build_vocabulary, featurize as featurize_tokens, FeatureScheme};
use dptext_core::metrics::{confusion, metrics, Averaging};
use dptext_core::model::LabeledExample;
use dptext_core::rng::{substream, StreamKind};
use dptext_core::text::StopwordList;
use dptext_core::trainer::{ClipMode, TrainConfig, TrainReport};
use dptext_core::{ClipNorm, FeatureVector, NoiseSpec, PrivacyParams, SigmaMode};

fn value_err(err: dptext_core::Error) -> PyErr {
    PyValueError::new_err(err.to_string())
}

fn parse_clip_mode(value: &str) -> PyResult<ClipMode> {
    match value {
        "batch" => Ok(ClipMode::Batch),
        "per_example" => Ok(ClipMode::PerExample),
        _ => Err(PyValueError::new_err(format!(
            "clip_mode must be 'batch' or 'per_example', got {value:?}"
        ))),
    }
}

fn parse_sigma_mode(value: &str) -> PyResult<SigmaMode> {
    match value {
        "literal" => Ok(SigmaMode::Literal),
        "sensitivity" => Ok(SigmaMode::Sensitivity),
        _ => Err(PyValueError::new_err(format!(
            "sigma_mode must be 'literal' or 'sensitivity', got {value:?}"
        ))),
    }
}

fn parse_scheme(value: &str) -> PyResult<FeatureScheme> {
    match value {
        "count" => Ok(FeatureScheme::Count),
        "tfidf" => Ok(FeatureScheme::TfIdf),
        _ => Err(PyValueError::new_err(format!(
            "scheme must be 'count' or 'tfidf', got {value:?}"
        ))),
    }
}

/// Noise standard deviation sqrt(2 ln(1/delta) / epsilon).
#[pyfunction]
fn noise_sigma(epsilon: f64, delta: f64) -> PyResult<f64> {
    let params = PrivacyParams::new(epsilon, delta).map_err(value_err)?;
    Ok(dptext_core::noise_sigma(&params).sigma())
}

/// noise_sigma multiplied by the clipping norm.
#[pyfunction]
fn noise_sigma_scaled(epsilon: f64, delta: f64, clip: f64) -> PyResult<f64> {
    let params = PrivacyParams::new(epsilon, delta).map_err(value_err)?;
    let clip = ClipNorm::new(clip).map_err(value_err)?;
    Ok(dptext_core::noise_sigma_scaled(&params, clip)
        .map_err(value_err)?
        .sigma())
}

/// Rescale a gradient so its L2 norm does not exceed `clip`.
#[pyfunction]
fn clip_gradient(values: Vec<f64>, clip: f64) -> PyResult<Vec<f64>> {
    let clip = ClipNorm::new(clip).map_err(value_err)?;
    let g = dptext_core::GradientVector::new(values);
    Ok(dptext_core::clip_gradient(&g, clip)
        .map_err(value_err)?
        .into_vec())
}

/// Seeded draws from N(0, sigma^2), one per coordinate.
#[pyfunction]
fn sample_noise(sigma: f64, dim: usize, seed: u64) -> PyResult<Vec<f64>> {
    let spec = NoiseSpec::new(sigma, false).map_err(value_err)?;
    let mut rng = substream(seed, StreamKind::Noise);
    Ok(dptext_core::sample_noise(&spec, dim, &mut rng).into_vec())
}

/// Remove angle-bracket markup.
#[pyfunction]
fn strip_markup(text: &str) -> String {
    dptext_core::strip_markup(text)
}

/// Lowercase alphabetic tokens of length >= 2.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    dptext_core::tokenize(text)
}

/// Suffix-rule lemmatization (borrowing -> borrow).
#[pyfunction]
fn lemmatize(token: &str) -> String {
    dptext_core::lemmatize(token)
}

/// Full cleaning pipeline: strip markup, tokenize, lemmatize, remove
/// stopwords. Uses the built-in English stopword list unless an explicit
/// word list is given.
#[pyfunction]
#[pyo3(signature = (text, stopwords=None))]
fn clean_document(text: &str, stopwords: Option<Vec<String>>) -> Vec<String> {
    let stops = match stopwords {
        Some(words) => StopwordList::parse(&words.join("\n")),
        None => StopwordList::english(),
    };
    dptext_core::clean_document(text, &stops)
}

/// Accuracy/precision/recall/F1 from parallel prediction and label lists.
/// Binary problems report the positive class; larger ones macro-average.
#[pyfunction]
fn evaluate_metrics(
    py: Python<'_>,
    preds: Vec<usize>,
    labels: Vec<usize>,
    num_classes: usize,
) -> PyResult<Py<PyDict>> {
    let counts = confusion(&preds, &labels, num_classes).map_err(value_err)?;
    let report = metrics(&counts, Averaging::for_num_classes(num_classes));
    let dict = PyDict::new(py);
    dict.set_item("accuracy", report.accuracy)?;
    dict.set_item("precision", report.precision)?;
    dict.set_item("recall", report.recall)?;
    dict.set_item("f1", report.f1)?;
    dict.set_item("averaging", report.averaging.as_str())?;
    Ok(dict.into())
}

/// Linear-composition privacy ledger.
#[pyclass]
struct BudgetLedger {
    inner: dptext_core::BudgetLedger,
}

#[pymethods]
impl BudgetLedger {
    #[new]
    #[pyo3(signature = (epsilon, delta, epsilon_cap=None, delta_cap=None))]
    fn new(
        epsilon: f64,
        delta: f64,
        epsilon_cap: Option<f64>,
        delta_cap: Option<f64>,
    ) -> PyResult<Self> {
        let params = PrivacyParams::new(epsilon, delta).map_err(value_err)?;
        let inner =
            dptext_core::BudgetLedger::new(params, epsilon_cap, delta_cap).map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Charge one step; raises RuntimeError once a cap would be exceeded.
    fn charge_step(&mut self) -> PyResult<()> {
        self.inner
            .charge_step()
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn steps_taken(&self) -> u64 {
        self.inner.steps_taken()
    }

    fn spent_epsilon(&self) -> f64 {
        self.inner.spent_epsilon()
    }

    fn spent_delta(&self) -> f64 {
        self.inner.spent_delta()
    }

    fn __repr__(&self) -> String {
        format!(
            "BudgetLedger(steps={}, spent_epsilon={}, spent_delta={})",
            self.inner.steps_taken(),
            self.inner.spent_epsilon(),
            self.inner.spent_delta()
        )
    }
}

/// Token-to-index map with document frequencies.
#[pyclass]
struct Vocabulary {
    inner: dptext_core::Vocabulary,
}

#[pymethods]
impl Vocabulary {
    /// Build from cleaned token lists.
    #[staticmethod]
    #[pyo3(signature = (corpus, min_doc_freq=1))]
    fn build(corpus: Vec<Vec<String>>, min_doc_freq: usize) -> PyResult<Self> {
        let inner = build_vocabulary(&corpus, min_doc_freq).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: read_vocabulary(path).map_err(value_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        write_vocabulary(path, &self.inner).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn num_documents(&self) -> usize {
        self.inner.num_documents()
    }

    fn index_of(&self, token: &str) -> Option<usize> {
        self.inner.index_of(token)
    }

    /// Sparse index -> weight map for one token list.
    #[pyo3(signature = (tokens, scheme="count"))]
    fn featurize(&self, tokens: Vec<String>, scheme: &str) -> PyResult<HashMap<usize, f64>> {
        let scheme = parse_scheme(scheme)?;
        Ok(featurize_tokens(&tokens, &self.inner, scheme)
            .entries()
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Vocabulary(tokens={}, documents={})",
            self.inner.len(),
            self.inner.num_documents()
        )
    }
}

/// Trained linear softmax classifier.
#[pyclass]
struct Model {
    inner: dptext_core::ModelParams,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: read_checkpoint(path).map_err(value_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        write_checkpoint(path, &self.inner).map_err(value_err)
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    #[getter]
    fn num_features(&self) -> usize {
        self.inner.num_features()
    }

    /// Flat parameter vector (weights row-major by class, then biases).
    fn parameters(&self) -> Vec<f64> {
        self.inner.flatten()
    }

    fn predict(&self, features: HashMap<usize, f64>) -> PyResult<usize> {
        let x = FeatureVector::from_entries(features, self.inner.num_features())
            .map_err(value_err)?;
        dptext_core::predict(&self.inner, &x).map_err(value_err)
    }

    fn predict_proba(&self, features: HashMap<usize, f64>) -> PyResult<Vec<f64>> {
        let x = FeatureVector::from_entries(features, self.inner.num_features())
            .map_err(value_err)?;
        dptext_core::predict_proba(&self.inner, &x).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(classes={}, features={})",
            self.inner.num_classes(),
            self.inner.num_features()
        )
    }
}

fn to_examples(
    examples: Vec<(HashMap<usize, f64>, usize)>,
    num_features: usize,
) -> PyResult<Vec<LabeledExample>> {
    examples
        .into_iter()
        .map(|(features, label)| {
            let x = FeatureVector::from_entries(features, num_features).map_err(value_err)?;
            Ok(LabeledExample::new(x, label))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn build_config(
    epsilon: f64,
    delta: f64,
    clip: f64,
    lr: f64,
    epochs: usize,
    batch_size: usize,
    seed: u64,
    noise: bool,
    clip_mode: &str,
    sigma_mode: &str,
    l2: f64,
    epsilon_cap: Option<f64>,
    delta_cap: Option<f64>,
) -> PyResult<TrainConfig> {
    let config = TrainConfig {
        lr,
        epochs,
        batch_size,
        clip: ClipNorm::new(clip).map_err(value_err)?,
        privacy: PrivacyParams::new(epsilon, delta).map_err(value_err)?,
        seed,
        clip_mode: parse_clip_mode(clip_mode)?,
        sigma_mode: parse_sigma_mode(sigma_mode)?,
        noise_enabled: noise,
        l2,
        epsilon_cap,
        delta_cap,
    };
    config.validate().map_err(value_err)?;
    Ok(config)
}

fn report_dict(py: Python<'_>, report: &TrainReport) -> PyResult<Py<PyDict>> {
    let dict = PyDict::new(py);
    dict.set_item("steps", report.steps_taken)?;
    dict.set_item("spent_epsilon", report.spent_epsilon)?;
    dict.set_item("spent_delta", report.spent_delta)?;
    dict.set_item("early_stopped", report.early_stopped)?;
    dict.set_item("epoch_losses", report.epoch_losses.clone())?;
    dict.set_item("wall_time_secs", report.wall_time_secs)?;
    Ok(dict.into())
}

/// Differentially private training over (sparse-features, label) pairs.
/// Returns (Model, report dict).
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (examples, num_features, *, epsilon=1.0, delta=1e-5, clip=1.0, lr=0.1,
                    epochs=20, batch_size=32, seed=42, noise=true, clip_mode="per_example",
                    sigma_mode="literal", l2=0.0, epsilon_cap=None, delta_cap=None))]
fn train_dp(
    py: Python<'_>,
    examples: Vec<(HashMap<usize, f64>, usize)>,
    num_features: usize,
    epsilon: f64,
    delta: f64,
    clip: f64,
    lr: f64,
    epochs: usize,
    batch_size: usize,
    seed: u64,
    noise: bool,
    clip_mode: &str,
    sigma_mode: &str,
    l2: f64,
    epsilon_cap: Option<f64>,
    delta_cap: Option<f64>,
) -> PyResult<(Model, Py<PyDict>)> {
    let data = to_examples(examples, num_features)?;
    let config = build_config(
        epsilon, delta, clip, lr, epochs, batch_size, seed, noise, clip_mode, sigma_mode, l2,
        epsilon_cap, delta_cap,
    )?;
    let (theta, report, _) = dptext_core::train_dp(&data, &config).map_err(value_err)?;
    Ok((Model { inner: theta }, report_dict(py, &report)?))
}

/// Plain mini-batch gradient descent (no clipping, no noise, no ledger).
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (examples, num_features, *, lr=0.1, epochs=20, batch_size=32, seed=42, l2=0.0))]
fn train_baseline(
    py: Python<'_>,
    examples: Vec<(HashMap<usize, f64>, usize)>,
    num_features: usize,
    lr: f64,
    epochs: usize,
    batch_size: usize,
    seed: u64,
    l2: f64,
) -> PyResult<(Model, Py<PyDict>)> {
    let data = to_examples(examples, num_features)?;
    let config = TrainConfig {
        lr,
        epochs,
        batch_size,
        seed,
        l2,
        noise_enabled: false,
        ..TrainConfig::default()
    };
    config.validate().map_err(value_err)?;
    let (theta, report) = dptext_core::train_baseline(&data, &config).map_err(value_err)?;
    Ok((Model { inner: theta }, report_dict(py, &report)?))
}

#[pymodule]
fn dptext(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(noise_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(noise_sigma_scaled, m)?)?;
    m.add_function(wrap_pyfunction!(clip_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(sample_noise, m)?)?;
    m.add_function(wrap_pyfunction!(strip_markup, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(lemmatize, m)?)?;
    m.add_function(wrap_pyfunction!(clean_document, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(train_dp, m)?)?;
    m.add_function(wrap_pyfunction!(train_baseline, m)?)?;
    m.add_class::<BudgetLedger>()?;
    m.add_class::<Vocabulary>()?;
    m.add_class::<Model>()?;
    Ok(())
}
