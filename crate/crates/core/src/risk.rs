//! Group-conditional risk accounting, disparity metrics and Pareto dominance.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;

use crate::error::{Error, Result};

/// Probability clamp used by cross-entropy so that risks stay finite.
pub const CE_CLAMP: f64 = 1e-12;

const SIMPLEX_TOL: f64 = 1e-6;

/// Per-sample loss on a class-probability vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Loss {
    /// Squared Euclidean distance to the one-hot target, range [0, 2].
    #[default]
    Brier,
    /// Negative log-likelihood with probabilities clamped to [1e-12, 1 - 1e-12].
    CrossEntropy,
}

impl Loss {
    pub fn eval(self, probs: &[f64], target: usize) -> Result<f64> {
        check_simplex(probs, target)?;
        Ok(self.eval_unchecked(probs, target))
    }

    pub(crate) fn eval_unchecked(self, probs: &[f64], target: usize) -> f64 {
        match self {
            Loss::Brier => probs
                .iter()
                .enumerate()
                .map(|(k, &p)| {
                    let d = p - if k == target { 1.0 } else { 0.0 };
                    d * d
                })
                .sum(),
            Loss::CrossEntropy => -probs[target].clamp(CE_CLAMP, 1.0 - CE_CLAMP).ln(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Loss::Brier => "brier",
            Loss::CrossEntropy => "cross_entropy",
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brier" | "bs" => Ok(Loss::Brier),
            "cross_entropy" | "ce" | "xent" => Ok(Loss::CrossEntropy),
            other => Err(Error::input(format!("unknown loss '{other}'"))),
        }
    }
}

fn check_simplex(probs: &[f64], target: usize) -> Result<()> {
    if target >= probs.len() {
        return Err(Error::input(format!(
            "target {target} out of range for {} classes",
            probs.len()
        )));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < -SIMPLEX_TOL) {
        return Err(Error::input("probability vector has negative or non-finite entries"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::input(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// Brier score of a single prediction.
pub fn brier_loss(probs: &[f64], target: usize) -> Result<f64> {
    Loss::Brier.eval(probs, target)
}

/// Per-group expected loss together with the sample count behind each estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskVector {
    pub risks: Vec<f64>,
    pub counts: Vec<usize>,
}

impl RiskVector {
    /// A risk vector without sample counts (exact risks, hand-built vectors).
    pub fn new(risks: Vec<f64>) -> Self {
        let counts = vec![0; risks.len()];
        Self { risks, counts }
    }

    pub fn len(&self) -> usize {
        self.risks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.risks.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.risks.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.risks.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// ∞-norm of the pairwise gaps, i.e. max minus min.
    pub fn max_gap(&self) -> f64 {
        if self.risks.is_empty() {
            0.0
        } else {
            self.max() - self.min()
        }
    }

    /// Unweighted mean over groups.
    pub fn mean(&self) -> f64 {
        self.risks.iter().sum::<f64>() / self.risks.len() as f64
    }

    /// Index of the group with the largest risk; the first one on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (a, &r) in self.risks.iter().enumerate() {
            if r > self.risks[best] {
                best = a;
            }
        }
        best
    }

    pub fn dominates(&self, other: &RiskVector) -> Result<bool> {
        dominates(&self.risks, &other.risks)
    }
}

/// Mean loss of each group. Every group in `0..num_groups` must have at least one sample.
pub fn group_risks(
    probs: ArrayView2<'_, f64>,
    targets: &[usize],
    groups: &[usize],
    num_groups: usize,
    loss: Loss,
) -> Result<RiskVector> {
    let n = probs.nrows();
    if targets.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: targets.len(),
        });
    }
    if groups.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: groups.len(),
        });
    }
    let mut sums = vec![0.0; num_groups];
    let mut counts = vec![0usize; num_groups];
    for (i, row) in probs.rows().into_iter().enumerate() {
        let a = groups[i];
        if a >= num_groups {
            return Err(Error::input(format!("group id {a} out of range")));
        }
        let l = match row.as_slice() {
            Some(p) => loss.eval(p, targets[i])?,
            None => loss.eval(&row.to_vec(), targets[i])?,
        };
        sums[a] += l;
        counts[a] += 1;
    }
    if let Some(a) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyGroup(a));
    }
    let risks = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    Ok(RiskVector { risks, counts })
}

/// Pairwise absolute risk differences and their maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    /// Keyed by `(a, b)` with `a < b`; use [`GapReport::gap`] for symmetric lookup.
    pub pairwise: BTreeMap<(usize, usize), f64>,
    pub max_gap: f64,
}

impl GapReport {
    pub fn gap(&self, a: usize, b: usize) -> Option<f64> {
        if a == b {
            return Some(0.0);
        }
        self.pairwise.get(&(a.min(b), a.max(b))).copied()
    }
}

pub fn discrimination_gap(r: &RiskVector) -> GapReport {
    let mut pairwise = BTreeMap::new();
    for a in 0..r.len() {
        for b in (a + 1)..r.len() {
            pairwise.insert((a, b), (r.risks[a] - r.risks[b]).abs());
        }
    }
    GapReport {
        pairwise,
        max_gap: r.max_gap(),
    }
}

/// Pareto dominance for minimisation: no worse everywhere, strictly better somewhere.
pub fn dominates(r1: &[f64], r2: &[f64]) -> Result<bool> {
    if r1.len() != r2.len() {
        return Err(Error::Dimension {
            expected: r1.len(),
            got: r2.len(),
        });
    }
    let mut strictly = false;
    for (a, b) in r1.iter().zip(r2) {
        if a > b {
            return Ok(false);
        }
        if a < b {
            strictly = true;
        }
    }
    Ok(strictly)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveEntry {
    pub risks: RiskVector,
    pub iteration: usize,
    pub max_gap: f64,
}

/// Mutually non-dominated set of risk vectors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParetoArchive {
    entries: Vec<ArchiveEntry>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Would `r` be accepted? Does not modify the archive.
    pub fn admits(&self, r: &RiskVector) -> bool {
        !self
            .entries
            .iter()
            .any(|e| dominates(&e.risks.risks, &r.risks).unwrap_or(false))
    }

    /// Inserts `r` unless an entry dominates it; entries dominated by `r` are pruned.
    pub fn insert(&mut self, r: RiskVector, iteration: usize) -> bool {
        if !self.admits(&r) {
            return false;
        }
        self.entries
            .retain(|e| !dominates(&r.risks, &e.risks.risks).unwrap_or(false));
        let max_gap = r.max_gap();
        self.entries.push(ArchiveEntry {
            risks: r,
            iteration,
            max_gap,
        });
        true
    }

    pub fn contains(&self, r: &[f64]) -> bool {
        self.entries.iter().any(|e| e.risks.risks == r)
    }
}

/// Table-style summary of a per-group metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub sample_mean: f64,
    pub group_mean: f64,
    pub discrepancy: f64,
}

pub fn metric_summary(per_group: &[f64], ratios: &[f64]) -> Result<MetricSummary> {
    if per_group.is_empty() {
        return Err(Error::input("no groups to summarise"));
    }
    if per_group.len() != ratios.len() {
        return Err(Error::Dimension {
            expected: per_group.len(),
            got: ratios.len(),
        });
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::input(format!("group ratios sum to {total}, not 1")));
    }
    let sample_mean = per_group.iter().zip(ratios).map(|(m, w)| m * w).sum();
    let group_mean = per_group.iter().sum::<f64>() / per_group.len() as f64;
    let hi = per_group.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = per_group.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(MetricSummary {
        sample_mean,
        group_mean,
        discrepancy: hi - lo,
    })
}
