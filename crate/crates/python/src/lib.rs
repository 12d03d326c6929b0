//! Python bindings: scenarios and oracle, datasets, models, the Pareto archive,
//! baseline and Pareto-fair training, post-processing and full experiments.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use paretofair::baselines::{train_naive, train_rebalanced};
use paretofair::cli::postprocess as pp;
use paretofair::experiment::{run_experiment as run_exp, ExperimentConfig};
use paretofair::kv::KvFile;
use paretofair::oracle::{self, ScenarioParams, ScenarioSpec};
use paretofair::pareto::{self, trace_csv, PfHyperparams, TraceRow};
use paretofair::train::evaluate_risk;
use paretofair::{Activation, GroupedDataset, Loss, TrainConfig};

fn err(e: paretofair::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = paretofair::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("ragged feature rows"));
    }
    Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

type FrontRow = (Vec<f64>, Vec<f64>, f64);

/// Synthetic two-group scenario with a closed-form Bayes oracle.
#[pyclass(name = "Scenario")]
struct PyScenario {
    params: ScenarioParams,
    spec: ScenarioSpec,
}

impl PyScenario {
    fn build(params: ScenarioParams) -> PyResult<Self> {
        let spec = oracle::make_figure1_scenario(&params).map_err(err)?;
        Ok(Self { params, spec })
    }
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn asymmetric() -> PyResult<Self> {
        Self::build(ScenarioParams::asymmetric())
    }

    #[staticmethod]
    fn symmetric() -> PyResult<Self> {
        Self::build(ScenarioParams::symmetric())
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Self::build(ScenarioParams::load(&path).map_err(err)?)
    }

    #[staticmethod]
    fn from_kv(text: &str) -> PyResult<Self> {
        let kv = KvFile::parse(text, Path::new("")).map_err(err)?;
        Self::build(ScenarioParams::from_kv(&kv).map_err(err)?)
    }

    fn to_kv(&self) -> String {
        self.params.to_kv_string()
    }

    fn sample(&self, n: usize, seed: u64) -> PyResult<PyDataset> {
        Ok(PyDataset {
            inner: oracle::sample(&self.spec, n, seed).map_err(err)?,
        })
    }

    fn bayes_noise(&self) -> Vec<f64> {
        oracle::bayes_noise(&self.spec).risks
    }

    /// Exact group risks of the λ-scalarised Bayes predictor.
    fn scalarized_risks(&self, lambda: Vec<f64>) -> PyResult<Vec<f64>> {
        let table = oracle::scalarized_bayes_predictor(&self.spec, &lambda).map_err(err)?;
        Ok(oracle::exact_group_risks(&self.spec, &table).map_err(err)?.risks)
    }

    /// `(lambda, risks, max_gap)` for every non-dominated point.
    #[pyo3(signature = (num_lambda = 1001))]
    fn front(&self, num_lambda: usize) -> PyResult<Vec<FrontRow>> {
        let front = oracle::trace_front(&self.spec, num_lambda).map_err(err)?;
        Ok(front.into_iter().map(|p| (p.lambda, p.risks.risks, p.max_gap)).collect())
    }

    #[pyo3(signature = (num_lambda = 1001))]
    fn reference_points(&self, num_lambda: usize) -> PyResult<HashMap<&'static str, Vec<f64>>> {
        let front = oracle::trace_front(&self.spec, num_lambda).map_err(err)?;
        let refs = oracle::reference_points(&self.spec, &front).map_err(err)?;
        Ok(refs.named().into_iter().map(|(k, r)| (k, r.risks.clone())).collect())
    }
}

#[pyclass(name = "Dataset")]
struct PyDataset {
    inner: GroupedDataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (features, targets, groups, group_names = None, num_classes = 2))]
    fn new(
        features: Vec<Vec<f64>>,
        targets: Vec<usize>,
        groups: Vec<usize>,
        group_names: Option<Vec<String>>,
        num_classes: usize,
    ) -> PyResult<Self> {
        let g = groups.iter().max().map_or(0, |m| m + 1);
        let names = group_names.unwrap_or_else(|| (0..g).map(|a| a.to_string()).collect());
        Ok(Self {
            inner: GroupedDataset::new(matrix(features)?, targets, groups, names, num_classes).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load_csv(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: GroupedDataset::load_csv(&path).map_err(err)?,
        })
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_csv(&path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn features(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.features)
    }

    #[getter]
    fn targets(&self) -> Vec<usize> {
        self.inner.targets.clone()
    }

    #[getter]
    fn groups(&self) -> Vec<usize> {
        self.inner.groups.clone()
    }

    #[getter]
    fn group_names(&self) -> Vec<String> {
        self.inner.group_names.clone()
    }

    fn group_ratios(&self) -> Vec<f64> {
        self.inner.group_ratios()
    }

    fn split(&self, fractions: Vec<f64>, seed: u64) -> PyResult<Vec<PyDataset>> {
        let parts = self.inner.stratified_split(&fractions, seed).map_err(err)?;
        Ok(parts.into_iter().map(|inner| PyDataset { inner }).collect())
    }
}

#[pyclass(name = "Model")]
struct PyModel {
    inner: paretofair::Model,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (layer_dims, activation = "relu", seed = 0))]
    fn new(layer_dims: Vec<usize>, activation: &str, seed: u64) -> PyResult<Self> {
        let act: Activation = parse(activation)?;
        Ok(Self {
            inner: paretofair::Model::new(&layer_dims, act, seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: paretofair::Model::load(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    fn to_checkpoint(&self) -> String {
        self.inner.to_checkpoint()
    }

    #[getter]
    fn layer_dims(&self) -> Vec<usize> {
        self.inner.layer_dims().to_vec()
    }

    fn num_params(&self) -> usize {
        self.inner.num_params()
    }

    fn params(&self) -> Vec<f64> {
        self.inner.params_flat()
    }

    fn forward(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.inner.forward(matrix(x)?.view()).map_err(err)?))
    }

    #[pyo3(signature = (data, loss = "brier"))]
    fn group_risks(&self, data: PyRef<'_, PyDataset>, loss: &str) -> PyResult<Vec<f64>> {
        let loss: Loss = parse(loss)?;
        Ok(evaluate_risk(&self.inner, &data.inner, loss).map_err(err)?.risks)
    }
}

#[pyclass(name = "ParetoArchive")]
#[derive(Default)]
struct PyArchive {
    inner: paretofair::ParetoArchive,
}

#[pymethods]
impl PyArchive {
    #[new]
    fn new() -> Self {
        Self::default()
    }

    /// Returns whether `risks` entered the archive.
    #[pyo3(signature = (risks, iteration = 0))]
    fn insert(&mut self, risks: Vec<f64>, iteration: usize) -> bool {
        self.inner.insert(paretofair::RiskVector::new(risks), iteration)
    }

    fn entries(&self) -> Vec<Vec<f64>> {
        self.inner.entries().iter().map(|e| e.risks.risks.clone()).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyfunction]
fn dominates(r1: Vec<f64>, r2: Vec<f64>) -> PyResult<bool> {
    paretofair::risk::dominates(&r1, &r2).map_err(err)
}

#[pyfunction]
fn adaptive_loss(r: Vec<f64>, mu: Vec<f64>, c: f64) -> PyResult<f64> {
    pareto::adaptive_loss(&r, &mu, c).map_err(err)
}

#[pyfunction]
fn group_weights(r: Vec<f64>, mu: Vec<f64>, c: f64) -> Vec<f64> {
    pareto::group_weights(&r, &mu, c)
}

fn train_config(lr: f64, batch_size: usize, max_epochs: usize, patience: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        lr,
        batch_size,
        max_epochs,
        patience,
        seed,
        ..TrainConfig::default()
    }
}

fn trace_dicts<'py>(py: Python<'py>, trace: &[TraceRow]) -> PyResult<Vec<Bound<'py, PyDict>>> {
    trace
        .iter()
        .map(|row| {
            let d = PyDict::new(py);
            d.set_item("iter", row.iter)?;
            d.set_item("accepted", row.accepted)?;
            d.set_item("lr", row.lr)?;
            d.set_item("gamma", row.gamma)?;
            d.set_item("c", row.c)?;
            d.set_item("mu", row.mu.clone())?;
            d.set_item("risks", row.risks.clone())?;
            d.set_item("max_gap", row.max_gap)?;
            Ok(d)
        })
        .collect()
}

/// Trains a baseline (`naive` or `rebalanced`) and returns the best-validation model.
#[pyfunction]
#[pyo3(signature = (method, train, val, model, lr = 0.1, batch_size = 64, max_epochs = 60, patience = 8, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn train_baseline(
    method: &str,
    train: PyRef<'_, PyDataset>,
    val: PyRef<'_, PyDataset>,
    model: PyRef<'_, PyModel>,
    lr: f64,
    batch_size: usize,
    max_epochs: usize,
    patience: usize,
    seed: u64,
) -> PyResult<PyModel> {
    let cfg = train_config(lr, batch_size, max_epochs, patience, seed);
    let init = model.inner.clone();
    let out = match method {
        "naive" => train_naive(&train.inner, &val.inner, init, &cfg),
        "rebalanced" => train_rebalanced(&train.inner, &val.inner, init, &cfg),
        other => return Err(PyValueError::new_err(format!("unknown baseline '{other}'"))),
    }
    .map_err(err)?;
    Ok(PyModel { inner: out.model })
}

/// Runs the Pareto-fair outer loop; returns `(model, trace, stop_reason)`.
#[pyfunction]
#[pyo3(signature = (train, val, model, max_outer_iters = 50, lr = 0.1, batch_size = 64, max_epochs = 60, patience = 8, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn pareto_fair<'py>(
    py: Python<'py>,
    train: PyRef<'_, PyDataset>,
    val: PyRef<'_, PyDataset>,
    model: PyRef<'_, PyModel>,
    max_outer_iters: usize,
    lr: f64,
    batch_size: usize,
    max_epochs: usize,
    patience: usize,
    seed: u64,
) -> PyResult<(PyModel, Vec<Bound<'py, PyDict>>, String)> {
    let hp = PfHyperparams {
        max_outer_iters,
        lr0: lr,
        inner: train_config(lr, batch_size, max_epochs, patience, seed),
        ..PfHyperparams::default()
    };
    let out = pareto::pareto_fair_optimize(&train.inner, &val.inner, model.inner.clone(), &hp).map_err(err)?;
    let trace = trace_dicts(py, &out.trace)?;
    Ok((PyModel { inner: out.model }, trace, format!("{:?}", out.stop)))
}

/// Fits the group-equalizing randomized rule on `data` and applies it with `seed`.
/// Returns `(keep_probs, before_csv, after_csv)`.
#[pyfunction]
#[pyo3(signature = (model, data, seed = 0, method = "model"))]
fn postprocess(
    model: PyRef<'_, PyModel>,
    data: PyRef<'_, PyDataset>,
    seed: u64,
    method: &str,
) -> PyResult<(Vec<f64>, String, String)> {
    let out = pp(&model.inner, &data.inner, seed, method, None, None).map_err(err)?;
    Ok((
        out.rule.keep_prob,
        out.before.to_csv().map_err(err)?,
        out.after.to_csv().map_err(err)?,
    ))
}

/// Runs one experiment from flat `key = value` text; `seed` and `method` override it.
/// Returns a dict with `model`, `metrics_csv` and `trace_csv`.
#[pyfunction]
#[pyo3(signature = (config = "", seed = None, method = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config: &str,
    seed: Option<u64>,
    method: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut kv = KvFile::parse(config, Path::new("")).map_err(err)?;
    if let Some(m) = method {
        kv.set("method", m);
    }
    let mut cfg = ExperimentConfig::from_kv(&kv).map_err(err)?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    let res = run_exp(&cfg).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("metrics_csv", res.metrics.to_csv().map_err(err)?)?;
    d.set_item("trace_csv", trace_csv(&res.trace))?;
    d.set_item("test", PyDataset { inner: res.test })?;
    d.set_item("model", PyModel { inner: res.model })?;
    Ok(d)
}

#[pymodule]
fn paretofair_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyArchive>()?;
    m.add_function(wrap_pyfunction!(dominates, m)?)?;
    m.add_function(wrap_pyfunction!(adaptive_loss, m)?)?;
    m.add_function(wrap_pyfunction!(group_weights, m)?)?;
    m.add_function(wrap_pyfunction!(train_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(pareto_fair, m)?)?;
    m.add_function(wrap_pyfunction!(postprocess, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
