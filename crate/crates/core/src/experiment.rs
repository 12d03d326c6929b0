//! Experiment configuration and orchestration.
//!
//! Config keys (flat `key = value` file, all optional):
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `scenario` | built-in asymmetric scenario | scenario file to sample from |
//! | `data` | | dataset CSV (excludes `scenario`) |
//! | `n` | 20000 | samples drawn from the scenario |
//! | `method` | `paretofair` | `naive`, `rebalanced` or `paretofair` |
//! | `hidden` | `64, 64` | hidden layer widths (empty for a linear model) |
//! | `activation` | `relu` | `relu` or `tanh` |
//! | `loss` | `brier` | `brier` or `cross_entropy` |
//! | `lr`, `batch_size`, `max_epochs`, `patience`, `stratified` | see [`TrainConfig`] | inner SGD |
//! | `mu_init`, `k`, `gamma0`, `xi`, `zeta`, `max_outer_iters`, `max_consecutive_rejects`, `lr_min` | see [`PfHyperparams`] | outer loop |
//! | `split` | `0.6, 0.2, 0.2` | train / validation / test fractions |
//! | `seed` | 0 | drives sampling, splitting, initialisation and batching |
//! | `out` | | output directory |
//!
//! Relative paths are resolved against the config file's directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::baselines::{train_naive, train_rebalanced};
use crate::dataset::GroupedDataset;
use crate::error::{Error, Result};
use crate::kv::KvFile;
use crate::model::{Activation, Model};
use crate::oracle::{make_figure1_scenario, sample, ScenarioParams};
use crate::pareto::{pareto_fair_optimize, PfHyperparams, StopReason, TraceRow};
use crate::report::MethodMetrics;
use crate::train::TrainConfig;

pub const CONFIG_KEYS: &[&str] = &[
    "scenario",
    "data",
    "n",
    "method",
    "hidden",
    "activation",
    "loss",
    "lr",
    "batch_size",
    "max_epochs",
    "patience",
    "stratified",
    "mu_init",
    "k",
    "gamma0",
    "xi",
    "zeta",
    "max_outer_iters",
    "max_consecutive_rejects",
    "lr_min",
    "split",
    "seed",
    "out",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    Naive,
    Rebalanced,
    #[default]
    ParetoFair,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::Rebalanced => "rebalanced",
            Method::ParetoFair => "paretofair",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" | "na" => Ok(Method::Naive),
            "rebalanced" | "ren" => Ok(Method::Rebalanced),
            "paretofair" | "pf" => Ok(Method::ParetoFair),
            other => Err(Error::input(format!(
                "unknown method '{other}' (expected naive, rebalanced or paretofair)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Scenario(ScenarioParams),
    Csv(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub n: usize,
    pub method: Method,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub train: TrainConfig,
    pub pf: PfHyperparams,
    pub split: Vec<f64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Scenario(ScenarioParams::default()),
            n: 20_000,
            method: Method::default(),
            hidden: vec![64, 64],
            activation: Activation::Relu,
            train: TrainConfig::default(),
            pf: PfHyperparams::default(),
            split: vec![0.6, 0.2, 0.2],
            seed: 0,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        kv.check_known(CONFIG_KEYS)?;
        let base = kv.path.parent().unwrap_or(Path::new("")).to_path_buf();
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let d = Self::default();
        let data = match (kv.raw("scenario"), kv.raw("data")) {
            (Some(_), Some(_)) => {
                return Err(Error::input("config sets both 'scenario' and 'data'"));
            }
            (Some(s), None) => DataSource::Scenario(ScenarioParams::load(&resolve(s))?),
            (None, Some(p)) => DataSource::Csv(resolve(p)),
            (None, None) => d.data,
        };
        let seed = kv.get_or("seed", d.seed)?;
        let t = &d.train;
        let train = TrainConfig {
            lr: kv.get_or("lr", t.lr)?,
            batch_size: kv.get_or("batch_size", t.batch_size)?,
            max_epochs: kv.get_or("max_epochs", t.max_epochs)?,
            patience: kv.get_or("patience", t.patience)?,
            seed,
            stratified: kv.get_or("stratified", t.stratified)?,
            loss: kv.get_or("loss", t.loss)?,
        };
        let p = &d.pf;
        let pf = PfHyperparams {
            mu_init: kv.get_or("mu_init", p.mu_init)?,
            k: kv.get_or("k", p.k)?,
            gamma0: kv.get_or("gamma0", p.gamma0)?,
            xi: kv.get_or("xi", p.xi)?,
            zeta: kv.get_or("zeta", p.zeta)?,
            lr0: train.lr,
            max_outer_iters: kv.get_or("max_outer_iters", p.max_outer_iters)?,
            max_consecutive_rejects: kv.get_or("max_consecutive_rejects", p.max_consecutive_rejects)?,
            lr_min: kv.get_or("lr_min", p.lr_min)?,
            inner: train.clone(),
        };
        let cfg = Self {
            data,
            n: kv.get_or("n", d.n)?,
            method: kv.get_or("method", d.method)?,
            hidden: kv.get_list("hidden")?.unwrap_or(d.hidden),
            activation: kv.get_or("activation", d.activation)?,
            train,
            pf,
            split: kv.get_list("split")?.unwrap_or(d.split),
            seed,
            out: kv.raw("out").map(resolve),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv(&KvFile::load(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.split.len() != 3 {
            return Err(Error::input("split needs three fractions (train, val, test)"));
        }
        if self.split.iter().any(|&f| !(f > 0.0)) || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::input("split fractions must be positive and sum to 1"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::input("hidden layer widths must be positive"));
        }
        if let DataSource::Csv(p) = &self.data {
            if !p.is_file() {
                return Err(Error::input(format!("dataset '{}' does not exist", p.display())));
            }
        }
        if self.n == 0 {
            return Err(Error::input("n must be positive"));
        }
        self.train.validate()?;
        self.pf.validate()
    }

    /// Seed used everywhere; keeps train and PF configs in step.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
        self.pf.inner.seed = seed;
    }

    pub fn load_data(&self) -> Result<GroupedDataset> {
        match &self.data {
            DataSource::Scenario(params) => sample(&make_figure1_scenario(params)?, self.n, self.seed),
            DataSource::Csv(path) => GroupedDataset::load_csv(path),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub model: Model,
    pub train: GroupedDataset,
    pub val: GroupedDataset,
    pub test: GroupedDataset,
    pub metrics: MethodMetrics,
    /// Outer-loop trace; empty for the baselines.
    pub trace: Vec<TraceRow>,
    pub stop: Option<StopReason>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let data = cfg.load_data()?;
    let mut parts = data.stratified_split(&cfg.split, cfg.seed)?.into_iter();
    let (train, val, test) = (parts.next().unwrap(), parts.next().unwrap(), parts.next().unwrap());

    let mut dims = vec![data.num_features()];
    dims.extend(&cfg.hidden);
    dims.push(data.num_classes);
    let init = Model::new(&dims, cfg.activation, cfg.seed)?;

    let (model, trace, stop) = match cfg.method {
        Method::Naive => (train_naive(&train, &val, init, &cfg.train)?.model, Vec::new(), None),
        Method::Rebalanced => (train_rebalanced(&train, &val, init, &cfg.train)?.model, Vec::new(), None),
        Method::ParetoFair => {
            let out = pareto_fair_optimize(&train, &val, init, &cfg.pf)?;
            (out.model, out.trace, Some(out.stop))
        }
    };
    let metrics = MethodMetrics::evaluate(cfg.method.name(), &model, &test)?;
    Ok(ExperimentResult {
        model,
        train,
        val,
        test,
        metrics,
        trace,
        stop,
    })
}
