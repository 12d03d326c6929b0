//! Comparison methods: naive ERM, group-rebalanced ERM, and a randomised
//! post-processor that equalises group accuracies by mixing decisions with a fair coin.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::GroupedDataset;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::risk::RiskVector;
use crate::train::{sgd_early_stop, unit_weights, TrainConfig, TrainOutcome};

fn sample_mean(r: &RiskVector) -> f64 {
    let n: usize = r.counts.iter().sum();
    if n == 0 {
        return r.mean();
    }
    r.risks
        .iter()
        .zip(&r.counts)
        .map(|(v, &c)| v * c as f64)
        .sum::<f64>()
        / n as f64
}

/// Minimises the global (sample-weighted) risk with plain shuffled minibatches.
pub fn train_naive(
    train: &GroupedDataset,
    val: &GroupedDataset,
    model: Model,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let config = TrainConfig {
        stratified: false,
        ..config.clone()
    };
    sgd_early_stop(model, train, val, sample_mean, unit_weights, &config)
}

/// Minimises the unweighted mean of group risks with equal per-group sampling.
pub fn train_rebalanced(
    train: &GroupedDataset,
    val: &GroupedDataset,
    model: Model,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let config = TrainConfig {
        stratified: true,
        ..config.clone()
    };
    sgd_early_stop(model, train, val, RiskVector::mean, unit_weights, &config)
}

/// Hard decisions (argmax class) from a probability matrix.
pub fn decisions(probs: ArrayView2<'_, f64>) -> Vec<usize> {
    probs
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (k, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Per-group fraction of correct decisions.
pub fn group_accuracy(correct: &[bool], groups: &[usize], num_groups: usize) -> Result<Vec<f64>> {
    if correct.len() != groups.len() {
        return Err(Error::Dimension {
            expected: groups.len(),
            got: correct.len(),
        });
    }
    let mut hits = vec![0usize; num_groups];
    let mut counts = vec![0usize; num_groups];
    for (&ok, &a) in correct.iter().zip(groups) {
        if a >= num_groups {
            return Err(Error::input(format!("group id {a} out of range")));
        }
        counts[a] += 1;
        hits[a] += ok as usize;
    }
    if let Some(a) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyGroup(a));
    }
    Ok(hits
        .iter()
        .zip(&counts)
        .map(|(&h, &c)| h as f64 / c as f64)
        .collect())
}

/// Keep the base decision for group `a` with probability `keep_prob[a]`, otherwise
/// answer with a fair coin.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedGroupRule {
    pub keep_prob: Vec<f64>,
}

impl RandomizedGroupRule {
    pub fn new(keep_prob: Vec<f64>) -> Result<Self> {
        if keep_prob.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::input("keep probabilities must lie in [0, 1]"));
        }
        Ok(Self { keep_prob })
    }

    pub fn identity(num_groups: usize) -> Self {
        Self {
            keep_prob: vec![1.0; num_groups],
        }
    }

    /// Accuracy a group is expected to have after the rule.
    pub fn expected_accuracy(&self, group: usize, accuracy: f64) -> f64 {
        let k = self.keep_prob[group];
        k * accuracy + (1.0 - k) * 0.5
    }

    pub fn to_csv(&self, group_names: &[String]) -> String {
        let mut s = String::from("group,keep_prob\n");
        for (name, p) in group_names.iter().zip(&self.keep_prob) {
            writeln!(s, "{name},{p}").unwrap();
        }
        s
    }

    /// Reads a rule CSV; rows are matched to `group_names` by name.
    pub fn from_csv(path: &Path, group_names: &[String]) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["group", "keep_prob"] {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: "expected header 'group,keep_prob'".into(),
            });
        }
        let mut keep = vec![f64::NAN; group_names.len()];
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let perr = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg,
            };
            let a = group_names
                .iter()
                .position(|g| g == &rec[0])
                .ok_or_else(|| perr(format!("unknown group '{}'", &rec[0])))?;
            keep[a] = rec[1]
                .parse()
                .map_err(|_| perr(format!("non-numeric keep_prob '{}'", &rec[1])))?;
        }
        if let Some(a) = keep.iter().position(|k| k.is_nan()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: format!("no keep_prob for group '{}'", group_names[a]),
            });
        }
        Self::new(keep)
    }
}

/// Degrades every group to the worst group's accuracy `t`:
/// `keep_a = (t − 0.5) / (acc_a − 0.5)`, clamped to [0, 1]; the worst group keeps 1.
pub fn fit_equalizing_rule(
    decisions: &[usize],
    correct: &[bool],
    groups: &[usize],
    num_groups: usize,
) -> Result<RandomizedGroupRule> {
    if decisions.len() != correct.len() {
        return Err(Error::Dimension {
            expected: correct.len(),
            got: decisions.len(),
        });
    }
    let acc = group_accuracy(correct, groups, num_groups)?;
    let target = acc.iter().copied().fold(f64::INFINITY, f64::min);
    let mut keep = Vec::with_capacity(num_groups);
    for (a, &acc_a) in acc.iter().enumerate() {
        if acc_a == target {
            keep.push(1.0);
        } else if target < 0.5 {
            let worst = acc.iter().position(|&v| v == target).unwrap();
            return Err(Error::Infeasible(format!(
                "group {worst} is below chance ({target}); group {a} cannot be mixed down to it"
            )));
        } else {
            keep.push(((target - 0.5) / (acc_a - 0.5)).clamp(0.0, 1.0));
        }
    }
    RandomizedGroupRule::new(keep)
}

/// Applies the rule to binary decisions, deterministically per seed.
pub fn apply_rule(
    rule: &RandomizedGroupRule,
    decisions: &[usize],
    groups: &[usize],
    seed: u64,
) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    decisions
        .iter()
        .zip(groups)
        .map(|(&d, &a)| {
            let u: f64 = rng.gen();
            let coin = rng.gen_range(0..2usize);
            if u < rule.keep_prob[a] {
                d
            } else {
                coin
            }
        })
        .collect()
}
