//! Adaptive penalised loss and the Pareto-fair outer optimisation loop.
//!
//! The inner problem minimises `φ(h; μ, c) = Σₐ Rₐ + μₐ ((Rₐ − c)⁺)²` with μ and c
//! frozen. The outer loop accepts a new model only if its validation gap is
//! strictly smaller than the best so far and its validation risks are not
//! dominated by an earlier accepted point. Accepts move the threshold `c` and
//! rescale μ; rejects restore the last accepted model and shrink the step sizes.
//! Either way the worst group's multiplier is bumped by `(1 + γ)`.

use std::fmt::Write as _;

use crate::dataset::GroupedDataset;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::risk::{ParetoArchive, RiskVector};
use crate::train::{sgd_early_stop, TrainConfig};

pub use crate::train::evaluate_risk;

/// Guard for the μ* rescale denominator.
pub const RESCALE_EPS: f64 = 1e-12;

fn check_mu(mu: &[f64]) -> Result<()> {
    if mu.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
        return Err(Error::input("multipliers must be finite and nonnegative"));
    }
    Ok(())
}

fn pos(v: f64) -> f64 {
    v.max(0.0)
}

/// `Σₐ rₐ + μₐ ((rₐ − c)⁺)²`.
pub fn adaptive_loss(r: &[f64], mu: &[f64], c: f64) -> Result<f64> {
    if r.len() != mu.len() {
        return Err(Error::Dimension {
            expected: r.len(),
            got: mu.len(),
        });
    }
    check_mu(mu)?;
    Ok(r
        .iter()
        .zip(mu)
        .map(|(&ra, &ma)| {
            let e = pos(ra - c);
            ra + ma * e * e
        })
        .sum())
}

/// ∂φ/∂rₐ = 1 + 2μₐ(rₐ − c)⁺, always ≥ 1.
pub fn group_weights(r_hat: &[f64], mu: &[f64], c: f64) -> Vec<f64> {
    r_hat
        .iter()
        .zip(mu)
        .map(|(&ra, &ma)| 1.0 + 2.0 * ma * pos(ra - c))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PfHyperparams {
    /// Initial multiplier for every group. Must be positive: the multiplicative
    /// updates cannot leave zero.
    pub mu_init: f64,
    /// Divisor in `c ← minₐ rₐ / k`; `k > 1` keeps `c` below every group risk.
    pub k: f64,
    pub gamma0: f64,
    pub xi: f64,
    pub zeta: f64,
    pub lr0: f64,
    pub max_outer_iters: usize,
    pub max_consecutive_rejects: usize,
    pub lr_min: f64,
    /// Inner trainer settings; its `lr` is replaced by the outer loop's.
    pub inner: TrainConfig,
}

impl Default for PfHyperparams {
    fn default() -> Self {
        Self {
            mu_init: 1.0,
            k: 2.0,
            gamma0: 3.0,
            xi: 0.8,
            zeta: 0.9,
            lr0: 0.1,
            max_outer_iters: 50,
            max_consecutive_rejects: 10,
            lr_min: 1e-6,
            inner: TrainConfig::default(),
        }
    }
}

impl PfHyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::input(format!("invalid {what}")));
        if !(self.mu_init > 0.0 && self.mu_init.is_finite()) {
            return bad("mu_init (must be > 0)");
        }
        if !(self.k > 1.0 && self.k.is_finite()) {
            return bad("k (must be > 1)");
        }
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return bad("gamma (must be > 0)");
        }
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return bad("xi (must be in (0, 1))");
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return bad("zeta (must be in (0, 1))");
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad("lr (must be > 0)");
        }
        if self.max_outer_iters == 0 || self.max_consecutive_rejects == 0 {
            return bad("iteration limits (must be positive)");
        }
        if !(self.lr_min >= 0.0) {
            return bad("lr_min");
        }
        self.inner.validate()
    }
}

/// Everything the outer loop carries between iterations.
#[derive(Debug, Clone)]
pub struct AdaptiveLossState {
    pub mu: Vec<f64>,
    pub mu_star: Vec<f64>,
    pub c: f64,
    pub c_old: f64,
    pub gamma: f64,
    pub xi: f64,
    pub zeta: f64,
    pub k: f64,
    pub lr: f64,
    /// Smallest accepted validation gap; +∞ before the first accept.
    pub gamma_star: f64,
    pub best_model: Model,
    pub best_risks: Option<RiskVector>,
    pub archive: ParetoArchive,
    /// Group whose multiplier gets bumped; the argmax of the latest validation risks.
    pub worst: usize,
    pub iteration: usize,
}

impl AdaptiveLossState {
    pub fn new(model: &Model, num_groups: usize, hp: &PfHyperparams) -> Self {
        Self {
            mu: vec![hp.mu_init; num_groups],
            mu_star: vec![hp.mu_init; num_groups],
            c: 0.0,
            c_old: 0.0,
            gamma: hp.gamma0,
            xi: hp.xi,
            zeta: hp.zeta,
            k: hp.k,
            lr: hp.lr0,
            gamma_star: f64::INFINITY,
            best_model: model.clone(),
            best_risks: None,
            archive: ParetoArchive::new(),
            worst: 0,
            iteration: 0,
        }
    }

    /// φ at the current multipliers and threshold.
    pub fn objective(&self, r: &RiskVector) -> f64 {
        adaptive_loss(&r.risks, &self.mu, self.c).unwrap_or(f64::INFINITY)
    }

    /// Accept iff the gap strictly improves and no archived point dominates `r_val`.
    /// The archive is updated on acceptance.
    pub fn step_accept(&mut self, r_val: &RiskVector) -> bool {
        if !(r_val.max_gap() < self.gamma_star) {
            return false;
        }
        self.archive.insert(r_val.clone(), self.iteration)
    }

    pub fn accept_update(&mut self, r_val: &RiskVector, model: &Model) {
        self.best_model = model.clone();
        self.best_risks = Some(r_val.clone());
        self.gamma_star = r_val.max_gap();
        self.c_old = self.c;
        self.c = r_val.min() / self.k;
        self.mu_star = self
            .mu
            .iter()
            .zip(&r_val.risks)
            .map(|(&m, &r)| {
                let num = pos(r - self.c_old);
                let den = pos(r - self.c);
                if den == 0.0 {
                    0.0
                } else {
                    m * (num / den.max(RESCALE_EPS))
                }
            })
            .collect();
        self.worst = r_val.argmax();
    }

    /// Shrinks lr and γ, falls back to μ*, and returns the restored best model.
    pub fn reject_update(&mut self) -> Model {
        self.lr *= self.zeta;
        self.mu = self.mu_star.clone();
        self.gamma *= self.xi;
        self.best_model.clone()
    }

    pub fn bump_worst(&mut self, r_val: &RiskVector) {
        self.worst = r_val.argmax();
        self.mu[self.worst] *= 1.0 + self.gamma;
    }
}

/// One outer iteration. `lr`, `gamma`, `c` and `mu` are the values after the
/// iteration's updates, i.e. what the next inner run will use.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub accepted: bool,
    pub lr: f64,
    pub gamma: f64,
    pub c: f64,
    pub mu: Vec<f64>,
    pub risks: Vec<f64>,
    pub max_gap: f64,
    pub inner_epochs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    ConsecutiveRejects,
    LearningRateFloor,
}

#[derive(Debug, Clone)]
pub struct PfOutcome {
    pub model: Model,
    pub trace: Vec<TraceRow>,
    pub state: AdaptiveLossState,
    pub stop: StopReason,
}

impl PfOutcome {
    /// Validation risks of the returned model.
    pub fn best_risks(&self) -> Option<&RiskVector> {
        self.state.best_risks.as_ref()
    }
}

/// Runs the outer loop until an iteration, reject-streak, or learning-rate limit is hit.
pub fn pareto_fair_optimize(
    train: &GroupedDataset,
    val: &GroupedDataset,
    model: Model,
    hp: &PfHyperparams,
) -> Result<PfOutcome> {
    hp.validate()?;
    if train.num_groups() != val.num_groups() {
        return Err(Error::input("train and validation group sets differ"));
    }
    let g = train.num_groups();
    let mut state = AdaptiveLossState::new(&model, g, hp);
    let mut model = model;
    let mut trace = Vec::new();
    let mut rejects = 0usize;

    let stop = loop {
        let iter = state.iteration;
        let inner = TrainConfig {
            lr: state.lr,
            seed: hp.inner.seed.wrapping_add(iter as u64),
            ..hp.inner.clone()
        };
        let (mu, c) = (state.mu.clone(), state.c);
        let outcome = sgd_early_stop(
            model,
            train,
            val,
            |r| adaptive_loss(&r.risks, &mu, c).unwrap_or(f64::INFINITY),
            |r| group_weights(&r.risks, &mu, c),
            &inner,
        )?;
        model = outcome.model;
        let r_val = evaluate_risk(&model, val, hp.inner.loss)?;

        let accepted = state.step_accept(&r_val);
        if accepted {
            state.accept_update(&r_val, &model);
            rejects = 0;
        } else {
            model = state.reject_update();
            rejects += 1;
        }
        state.bump_worst(&r_val);

        trace.push(TraceRow {
            iter,
            accepted,
            lr: state.lr,
            gamma: state.gamma,
            c: state.c,
            mu: state.mu.clone(),
            max_gap: r_val.max_gap(),
            risks: r_val.risks,
            inner_epochs: outcome.epochs_run,
        });
        state.iteration += 1;

        if state.iteration >= hp.max_outer_iters {
            break StopReason::MaxIterations;
        }
        if rejects >= hp.max_consecutive_rejects {
            break StopReason::ConsecutiveRejects;
        }
        if state.lr < hp.lr_min {
            break StopReason::LearningRateFloor;
        }
    };

    Ok(PfOutcome {
        model: state.best_model.clone(),
        trace,
        state,
        stop,
    })
}

/// Trace as CSV: `iter,accepted,lr,gamma,c,mu_0..,r_0..,max_gap`.
pub fn trace_csv(trace: &[TraceRow]) -> String {
    let g = trace.first().map_or(0, |r| r.risks.len());
    let mut s = String::from("iter,accepted,lr,gamma,c");
    for a in 0..g {
        write!(s, ",mu_{a}").unwrap();
    }
    for a in 0..g {
        write!(s, ",r_{a}").unwrap();
    }
    s.push_str(",max_gap\n");
    for row in trace {
        write!(
            s,
            "{},{},{},{},{}",
            row.iter, row.accepted as u8, row.lr, row.gamma, row.c
        )
        .unwrap();
        for m in &row.mu {
            write!(s, ",{m}").unwrap();
        }
        for r in &row.risks {
            write!(s, ",{r}").unwrap();
        }
        writeln!(s, ",{}", row.max_gap).unwrap();
    }
    s
}
