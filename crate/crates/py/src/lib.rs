//! Python bindings.
//!
//! Records cross the boundary as plain dicts and lists (the same shape as the
//! JSONL files); models and schedules are wrapped as classes.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use ::transpref as core;
use core::curation::{self, CurationConfig, ScoreSource};
use core::dpo::{self, DpoBatch, DpoItem};
use core::eval::{self, EvalReport, ReportFormat};
use core::langid::{self, LangIdConfig, LangSample};
use core::{Article, CandidateTranslation};

create_exception!(transpref, TransprefError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    TransprefError::new_err(e.to_string())
}

/// Python object to a Rust value, via the stdlib json module.
fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let json = obj.py().import("json")?;
    let text: String = json.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(err)
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = core::jsonl::to_canonical_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn config_or_default<T: DeserializeOwned + Default>(obj: Option<&Bound<'_, PyAny>>) -> PyResult<T> {
    match obj {
        Some(o) if !o.is_none() => from_py(o),
        _ => Ok(T::default()),
    }
}

/// Character n-gram Naive Bayes language identifier.
#[pyclass(module = "transpref", frozen)]
struct LangProfile {
    inner: langid::LangProfile,
}

#[pymethods]
impl LangProfile {
    /// Trains on `(text, label)` pairs.
    #[staticmethod]
    #[pyo3(signature = (samples, config=None))]
    fn train(samples: Vec<(String, String)>, config: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let cfg: LangIdConfig = config_or_default(config)?;
        let corpus: Vec<LangSample> = samples
            .into_iter()
            .map(|(text, label)| LangSample { text, label })
            .collect();
        Ok(Self { inner: langid::train_langid(&corpus, &cfg).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: langid::LangProfile::load(path).map_err(err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(err)
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels.clone()
    }

    /// Returns `(label, confidence)`.
    fn identify(&self, text: &str) -> PyResult<(String, f64)> {
        let v = self.inner.identify(text).map_err(err)?;
        Ok((v.label, v.confidence))
    }

    fn posteriors(&self, text: &str) -> Vec<(String, f64)> {
        self.inner.labels.iter().cloned().zip(self.inner.posteriors(text)).collect()
    }
}

/// Bigram policy over token ids.
#[pyclass(module = "transpref", frozen)]
struct ToyPolicy {
    inner: dpo::ToyPolicy,
}

#[pymethods]
impl ToyPolicy {
    #[new]
    fn new(init_logits: Vec<f64>, transition_logits: Vec<Vec<f64>>) -> PyResult<Self> {
        let m = dpo::Matrix::try_from(transition_logits).map_err(err)?;
        Ok(Self { inner: dpo::ToyPolicy::new(init_logits, m).map_err(err)? })
    }

    #[staticmethod]
    fn uniform(vocab_size: usize) -> Self {
        Self { inner: dpo::ToyPolicy::uniform(vocab_size) }
    }

    #[staticmethod]
    #[pyo3(signature = (sequences, vocab_size, smoothing=1.0))]
    fn fit_bigram(sequences: Vec<Vec<usize>>, vocab_size: usize, smoothing: f64) -> PyResult<Self> {
        let refs: Vec<&[usize]> = sequences.iter().map(Vec::as_slice).collect();
        Ok(Self { inner: dpo::ToyPolicy::fit_bigram(&refs, vocab_size, smoothing).map_err(err)? })
    }

    #[getter]
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size
    }

    /// Log-probability of `response` following `prompt`.
    fn logprob(&self, prompt: Vec<usize>, response: Vec<usize>) -> PyResult<f64> {
        dpo::seq_logprob(&self.inner, &prompt, &response).map_err(err)
    }
}

/// Low-rank delta `A·Bᵀ` on the transition logits.
#[pyclass(module = "transpref", frozen)]
struct LowRankAdapter {
    inner: dpo::LowRankAdapter,
}

#[pymethods]
impl LowRankAdapter {
    #[new]
    fn new(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<Self> {
        let a = dpo::Matrix::try_from(a).map_err(err)?;
        let b = dpo::Matrix::try_from(b).map_err(err)?;
        if a.rows() != b.rows() || a.cols() != b.cols() {
            return Err(err("A and B must have the same shape"));
        }
        Ok(Self { inner: dpo::LowRankAdapter { rank: a.cols(), a, b } })
    }

    #[staticmethod]
    fn zeros(vocab_size: usize, rank: usize) -> Self {
        Self { inner: dpo::LowRankAdapter::zeros(vocab_size, rank) }
    }

    #[getter]
    fn a(&self) -> Vec<Vec<f64>> {
        self.inner.a.clone().into()
    }

    #[getter]
    fn b(&self) -> Vec<Vec<f64>> {
        self.inner.b.clone().into()
    }
}

type Triple = (Vec<usize>, Vec<usize>, Vec<usize>);

fn batch_of(items: Vec<Triple>) -> DpoBatch {
    DpoBatch::new(
        items
            .into_iter()
            .map(|(prompt, chosen, rejected)| DpoItem { prompt, chosen, rejected })
            .collect(),
    )
}

/// Mean DPO loss of `reference + adapter` against `reference`. Items are
/// `(prompt, chosen, rejected)` token lists. Returns `(loss, margins)`.
#[pyfunction]
fn dpo_loss(
    reference: &ToyPolicy,
    adapter: &LowRankAdapter,
    items: Vec<Triple>,
    beta: f64,
) -> PyResult<(f64, Vec<f64>)> {
    let policy = dpo::AdaptedPolicy::new(&reference.inner, &adapter.inner).map_err(err)?;
    let out = dpo::dpo_loss(&policy, &reference.inner, &batch_of(items), beta).map_err(err)?;
    Ok((out.loss, out.margins))
}

/// Loss and gradients: `(loss, dA, dB)`.
#[pyfunction]
fn dpo_grad(
    reference: &ToyPolicy,
    adapter: &LowRankAdapter,
    items: Vec<Triple>,
    beta: f64,
) -> PyResult<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let policy = dpo::AdaptedPolicy::new(&reference.inner, &adapter.inner).map_err(err)?;
    let (loss, g) = dpo::dpo_grad(&policy, &reference.inner, &batch_of(items), beta).map_err(err)?;
    Ok((loss.loss, g.a.into(), g.b.into()))
}

/// Trains an adapter. Returns `(best_adapter, summary)`.
#[pyfunction]
#[pyo3(signature = (reference, train, val, config=None))]
fn train_dpo<'py>(
    py: Python<'py>,
    reference: &ToyPolicy,
    train: Vec<Triple>,
    val: Vec<Triple>,
    config: Option<&Bound<'py, PyAny>>,
) -> PyResult<(LowRankAdapter, Bound<'py, PyAny>)> {
    let cfg: dpo::TrainConfig = config_or_default(config)?;
    let (train, val) = (batch_of(train).items, batch_of(val).items);
    let state = py
        .detach(|| dpo::train(&reference.inner, &train, &val, &cfg))
        .map_err(err)?;
    let summary = serde_json::json!({
        "steps": state.step,
        "best_step": state.best.step,
        "best_val_loss": state.best.val_loss,
        "val_history": state.val_history,
        "epochs": state.epochs,
        "log": state.log,
    });
    Ok((LowRankAdapter { inner: state.best.adapter }, to_py(py, &summary)?))
}

/// Warmup then cosine decay to a floor.
#[pyclass(module = "transpref", frozen)]
struct LrSchedule {
    inner: dpo::LrSchedule,
}

#[pymethods]
impl LrSchedule {
    #[new]
    fn new(peak_lr: f64, min_lr: f64, warmup_steps: usize, total_steps: usize) -> PyResult<Self> {
        Ok(Self { inner: dpo::LrSchedule::new(peak_lr, min_lr, warmup_steps, total_steps).map_err(err)? })
    }

    fn lr_at(&self, step: usize) -> PyResult<f64> {
        self.inner.lr_at(step).map_err(err)
    }
}

#[pyfunction]
fn proxy_score(source: &str, translation: &str) -> PyResult<f64> {
    core::scorer::proxy_score(source, translation).map_err(err)
}

/// Curates and assembles. `articles` and `translations` are lists of dicts in
/// the JSONL record layout. Returns a dict with `train`, `val`, `manifest`
/// and `verdicts`.
#[pyfunction]
#[pyo3(signature = (articles, translations, profile, config=None))]
fn curate<'py>(
    py: Python<'py>,
    articles: &Bound<'py, PyAny>,
    translations: &Bound<'py, PyAny>,
    profile: &LangProfile,
    config: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let articles: Vec<Article> = from_py(articles)?;
    let translations: Vec<CandidateTranslation> = from_py(translations)?;
    let cfg: CurationConfig = config_or_default(config)?;
    let scorer = core::scorer::ProxyScorer;
    let run = py
        .detach(|| {
            curation::curate_and_assemble(
                &articles,
                &translations,
                &profile.inner,
                ScoreSource::Scorer(&scorer),
                &cfg,
            )
        })
        .map_err(err)?;
    let out = serde_json::json!({
        "train": run.assembled.train,
        "val": run.assembled.val,
        "manifest": run.assembled.manifest,
        "verdicts": run.verdicts,
    });
    to_py(py, &out)
}

/// Error rates and proxy scores per model, as a report dict.
#[pyfunction]
#[pyo3(signature = (articles, translations, profile, config=None))]
fn evaluate<'py>(
    py: Python<'py>,
    articles: &Bound<'py, PyAny>,
    translations: &Bound<'py, PyAny>,
    profile: &LangProfile,
    config: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let articles: Vec<Article> = from_py(articles)?;
    let translations: Vec<CandidateTranslation> = from_py(translations)?;
    let cfg: CurationConfig = config_or_default(config)?;
    let scorer = core::scorer::ProxyScorer;
    let report = py
        .detach(|| {
            eval::evaluate(&articles, &translations, &profile.inner, Some(ScoreSource::Scorer(&scorer)), &cfg)
        })
        .map_err(err)?;
    to_py(py, &report)
}

/// Renders a report dict as `markdown`, `json` or `csv`.
#[pyfunction]
#[pyo3(signature = (report, format="markdown"))]
fn render_report(report: &Bound<'_, PyAny>, format: &str) -> PyResult<String> {
    let report: EvalReport = from_py(report)?;
    let format: ReportFormat = format.parse().map_err(err)?;
    eval::render_report(&report, format).map_err(err)
}

#[pymodule]
#[pyo3(name = "transpref")]
fn transpref_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TransprefError", m.py().get_type::<TransprefError>())?;
    m.add_class::<LangProfile>()?;
    m.add_class::<ToyPolicy>()?;
    m.add_class::<LowRankAdapter>()?;
    m.add_class::<LrSchedule>()?;
    m.add_function(wrap_pyfunction!(dpo_loss, m)?)?;
    m.add_function(wrap_pyfunction!(dpo_grad, m)?)?;
    m.add_function(wrap_pyfunction!(train_dpo, m)?)?;
    m.add_function(wrap_pyfunction!(proxy_score, m)?)?;
    m.add_function(wrap_pyfunction!(curate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(render_report, m)?)?;
    Ok(())
}
