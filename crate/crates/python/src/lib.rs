//! Python bindings: preprocessing, splitting, training, persistence,
//! prediction and metrics.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sentibench::bench::{self, synth, RunConfig};
use sentibench::bilstm::{self, BilstmModel};
use sentibench::corpus::{self, LabeledExample};
use sentibench::metrics;
use sentibench::model_store::{self, Classifier, Family, ModelArtifact, Prediction};
use sentibench::text_prep::CleanDocument;
use sentibench::{Error, Label};

fn err(e: Error) -> PyErr {
    match e.root() {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn labels(xs: &[String]) -> PyResult<Vec<Label>> {
    xs.iter()
        .map(|s| s.parse::<Label>().map_err(|_| PyValueError::new_err(format!("unknown label `{s}`"))))
        .collect()
}

fn config(seed: u64, options: Option<Vec<(String, String)>>) -> PyResult<RunConfig> {
    let mut cfg = RunConfig {
        seed,
        ..RunConfig::default()
    };
    let options = options.unwrap_or_default();
    cfg.apply(options.iter().map(|(k, v)| (k.as_str(), v.as_str())))
        .map_err(err)?;
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

/// Cleans one text with the bundled lexicons and returns its tokens.
#[pyfunction]
fn preprocess(text: &str) -> PyResult<Vec<String>> {
    let prep = bench::build_preprocessor(&RunConfig::default()).map_err(err)?;
    Ok(prep.process(0, text).tokens)
}

/// Trainable parameters of the default BiLSTM for a vocabulary of `vocab` ids.
#[pyfunction]
fn param_count(vocab: usize) -> usize {
    bilstm::param_count(vocab, &bilstm::BilstmConfig::default())
}

/// Stratified train/validation/test positions for a list of labels.
#[pyfunction]
#[pyo3(signature = (labels_, ratios=(0.8, 0.1, 0.1), seed=42))]
fn stratified_split(labels_: Vec<String>, ratios: (f64, f64, f64), seed: u64) -> PyResult<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let corpus: Vec<LabeledExample> = labels(&labels_)?
        .into_iter()
        .enumerate()
        .map(|(id, label)| LabeledExample {
            id,
            text: String::new(),
            label,
            metadata: Default::default(),
        })
        .collect();
    let s = corpus::stratified_split(&corpus, [ratios.0, ratios.1, ratios.2], seed).map_err(err)?;
    Ok((s.train, s.validation, s.test))
}

/// `(text, label)` pairs from the seeded synthetic review generator.
#[pyfunction]
#[pyo3(signature = (n=synth::SYNTH_DOCS, seed=synth::SYNTH_SEED))]
fn synthetic_corpus(n: usize, seed: u64) -> Vec<(String, String)> {
    synth::synthetic_corpus(n, seed)
        .into_iter()
        .map(|e| (e.text, e.label.as_str().to_string()))
        .collect()
}

/// Accuracy, macro and weighted scores, kappa and (with `probs`) macro AUC.
#[pyfunction]
#[pyo3(signature = (y_true, y_pred, probs=None))]
fn evaluate<'py>(
    py: Python<'py>,
    y_true: Vec<String>,
    y_pred: Vec<String>,
    probs: Option<Vec<[f64; 3]>>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = metrics::evaluate(&labels(&y_true)?, &labels(&y_pred)?, probs.as_deref()).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("accuracy", r.accuracy)?;
    d.set_item("macro_precision", r.macro_precision)?;
    d.set_item("macro_recall", r.macro_recall)?;
    d.set_item("macro_f1", r.macro_f1)?;
    d.set_item("weighted_precision", r.weighted_precision)?;
    d.set_item("weighted_recall", r.weighted_recall)?;
    d.set_item("weighted_f1", r.weighted_f1)?;
    d.set_item("kappa", r.kappa)?;
    d.set_item("auc_macro", r.auc_macro)?;
    d.set_item("confusion", r.confusion.counts.to_vec())?;
    Ok(d)
}

fn prediction_dict<'py>(py: Python<'py>, p: &Prediction) -> PyResult<Bound<'py, PyDict>> {
    let per_class = |m: &std::collections::BTreeMap<Label, f64>| -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (l, v) in m {
            d.set_item(l.as_str(), *v)?;
        }
        Ok(d)
    };
    let d = PyDict::new(py);
    d.set_item("label", p.label.as_str())?;
    match &p.probabilities {
        Some(m) => d.set_item("probabilities", per_class(m)?)?,
        None => d.set_item("probabilities", py.None())?,
    }
    d.set_item("scores", per_class(&p.scores)?)?;
    d.set_item("model_family", p.model_family.as_str())?;
    d.set_item("no_signal", p.no_signal)?;
    Ok(d)
}

/// A trained, self-contained model (preprocessing included).
#[pyclass(frozen)]
struct Model {
    inner: ModelArtifact,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Model {
            inner: model_store::load(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        model_store::save(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.family().as_str()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    fn predict<'py>(&self, py: Python<'py>, texts: Vec<String>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let preds = py.detach(|| self.inner.predict_texts(&texts)).map_err(err)?;
        preds.iter().map(|p| prediction_dict(py, p)).collect()
    }
}

/// Fits one family on `texts`. Classical families use all rows; the BiLSTM
/// trains on the training part of a stratified split and early-stops on the
/// validation part. `options` are config `(key, value)` overrides.
#[pyfunction]
#[pyo3(signature = (family, texts, labels_, seed=42, options=None))]
fn train(
    py: Python<'_>,
    family: &str,
    texts: Vec<String>,
    labels_: Vec<String>,
    seed: u64,
    options: Option<Vec<(String, String)>>,
) -> PyResult<Model> {
    let family: Family = family.parse().map_err(err)?;
    let y = labels(&labels_)?;
    if texts.len() != y.len() {
        return Err(PyValueError::new_err("texts and labels differ in length"));
    }
    let cfg = config(seed, options)?;
    let inner = py
        .detach(|| -> sentibench::Result<ModelArtifact> {
            let prep = bench::build_preprocessor(&cfg)?;
            let docs: Vec<CleanDocument> = texts.iter().enumerate().map(|(i, t)| prep.process(i, t)).collect();
            let clf = if family == Family::Bilstm {
                let corpus: Vec<LabeledExample> = texts
                    .iter()
                    .zip(&y)
                    .enumerate()
                    .map(|(id, (t, &label))| LabeledExample {
                        id,
                        text: t.clone(),
                        label,
                        metadata: Default::default(),
                    })
                    .collect();
                let s = corpus::stratified_split(&corpus, cfg.split_ratios, cfg.seed)?;
                let pick = |ids: &[usize]| -> (Vec<CleanDocument>, Vec<Label>) {
                    (ids.iter().map(|&i| docs[i].clone()).collect(), ids.iter().map(|&i| y[i]).collect())
                };
                let (tr, ty) = pick(&s.train);
                let (va, vy) = pick(&s.validation);
                let bcfg = bilstm::BilstmConfig { seed, ..cfg.bilstm };
                Classifier::Bilstm(BilstmModel::train(&tr, &ty, &va, &vy, &bcfg)?)
            } else {
                bench::fit_classical(family, &docs, &y, &cfg, seed)?
            };
            Ok(ModelArtifact::new(prep, clf, seed, cfg.family_text(family)))
        })
        .map_err(err)?;
    Ok(Model { inner })
}

#[pymodule]
fn sentibench_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(preprocess, m)?)?;
    m.add_function(wrap_pyfunction!(param_count, m)?)?;
    m.add_function(wrap_pyfunction!(stratified_split, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
