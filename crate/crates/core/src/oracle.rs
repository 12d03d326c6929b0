//! Exact, grid-discretised two-level scenarios with a known Pareto front.
//!
//! A scenario tabulates `p(x|a)` and `η_a(x) = p(y=1|x,a)` on a uniform grid. The
//! hypothesis class is every table `g(x) ∈ [0,1]` of predicted positive-class
//! probabilities. Group risks are computed in closed form under the Brier score,
//! so the front, the Pareto-fair point and the baselines' positions are exact.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::GroupedDataset;
use crate::error::{Error, Result};
use crate::kv::{join, KvFile};
use crate::risk::{dominates, RiskVector};

const SUM_TOL: f64 = 1e-9;

/// Constructor parameters for a two-level scenario.
///
/// Group `a` has a bell-shaped `p(x|a)` (Gaussian truncated to the grid) with
/// `means[a]`, `widths[a]`, and `η_a(x) = rho_low[a]` for `x < transition + delta[a]`,
/// `rho_high[a]` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub grid_size: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub priors: Vec<f64>,
    pub means: Vec<f64>,
    pub widths: Vec<f64>,
    pub rho_low: Vec<f64>,
    pub rho_high: Vec<f64>,
    pub transition: f64,
    pub delta: Vec<f64>,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self::asymmetric()
    }
}

const SCENARIO_KEYS: &[&str] = &[
    "grid_size",
    "x_min",
    "x_max",
    "priors",
    "means",
    "widths",
    "rho_low",
    "rho_high",
    "transition",
    "delta",
];

impl ScenarioParams {
    /// Two groups with unequal noise: levels (0.1, 0.9) vs (0.3, 0.7), transitions 0.1 apart.
    pub fn asymmetric() -> Self {
        Self {
            grid_size: 401,
            x_min: 0.0,
            x_max: 1.0,
            priors: vec![0.7, 0.3],
            means: vec![0.4, 0.6],
            widths: vec![0.15, 0.15],
            rho_low: vec![0.1, 0.3],
            rho_high: vec![0.9, 0.7],
            transition: 0.6,
            delta: vec![0.0, 0.1],
        }
    }

    /// Two groups with identical densities and conditionals.
    pub fn symmetric() -> Self {
        Self {
            grid_size: 401,
            x_min: 0.0,
            x_max: 1.0,
            priors: vec![0.7, 0.3],
            means: vec![0.5, 0.5],
            widths: vec![0.15, 0.15],
            rho_low: vec![0.1, 0.1],
            rho_high: vec![0.9, 0.9],
            transition: 0.5,
            delta: vec![0.0, 0.0],
        }
    }

    pub fn num_groups(&self) -> usize {
        self.priors.len()
    }

    pub fn transition_of(&self, a: usize) -> f64 {
        self.transition + self.delta[a]
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.priors.len();
        if g == 0 {
            return Err(Error::input("scenario needs at least one group"));
        }
        for (name, len) in [
            ("means", self.means.len()),
            ("widths", self.widths.len()),
            ("rho_low", self.rho_low.len()),
            ("rho_high", self.rho_high.len()),
            ("delta", self.delta.len()),
        ] {
            if len != g {
                return Err(Error::input(format!("{name} has {len} entries, expected {g}")));
            }
        }
        if self.grid_size < 2 {
            return Err(Error::input("grid_size must be at least 2"));
        }
        if !(self.x_min < self.x_max) || !self.x_min.is_finite() || !self.x_max.is_finite() {
            return Err(Error::input("need x_min < x_max"));
        }
        if self.priors.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::input("priors must be positive"));
        }
        let total: f64 = self.priors.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::input(format!("priors sum to {total}, not 1")));
        }
        if self.widths.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::input("widths must be positive"));
        }
        for a in 0..g {
            let (lo, hi) = (self.rho_low[a], self.rho_high[a]);
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || !(lo < hi) {
                return Err(Error::input(format!(
                    "group {a}: need 0 <= rho_low < rho_high <= 1, got ({lo}, {hi})"
                )));
            }
            let t = self.transition_of(a);
            if !(t > self.x_min && t < self.x_max) {
                return Err(Error::input(format!(
                    "group {a}: transition {t} outside ({}, {})",
                    self.x_min, self.x_max
                )));
            }
        }
        Ok(())
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        kv.check_known(SCENARIO_KEYS)?;
        let d = Self::default();
        let p = Self {
            grid_size: kv.get_or("grid_size", d.grid_size)?,
            x_min: kv.get_or("x_min", d.x_min)?,
            x_max: kv.get_or("x_max", d.x_max)?,
            priors: kv.require_list("priors")?,
            means: kv.require_list("means")?,
            widths: kv.require_list("widths")?,
            rho_low: kv.require_list("rho_low")?,
            rho_high: kv.require_list("rho_high")?,
            transition: kv.require("transition")?,
            delta: kv.require_list("delta")?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv(&KvFile::load(path)?)
    }

    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        writeln!(s, "grid_size = {}", self.grid_size).unwrap();
        writeln!(s, "x_min = {}", self.x_min).unwrap();
        writeln!(s, "x_max = {}", self.x_max).unwrap();
        writeln!(s, "priors = {}", join(&self.priors)).unwrap();
        writeln!(s, "means = {}", join(&self.means)).unwrap();
        writeln!(s, "widths = {}", join(&self.widths)).unwrap();
        writeln!(s, "rho_low = {}", join(&self.rho_low)).unwrap();
        writeln!(s, "rho_high = {}", join(&self.rho_high)).unwrap();
        writeln!(s, "transition = {}", self.transition).unwrap();
        writeln!(s, "delta = {}", join(&self.delta)).unwrap();
        s
    }
}

/// Discretised generative model.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub grid: Vec<f64>,
    pub priors: Vec<f64>,
    /// `G × B`, rows sum to 1.
    pub density: Array2<f64>,
    /// `G × B`, entries in [0, 1].
    pub eta: Array2<f64>,
}

impl ScenarioSpec {
    pub fn new(grid: Vec<f64>, priors: Vec<f64>, density: Array2<f64>, eta: Array2<f64>) -> Result<Self> {
        let spec = Self {
            grid,
            priors,
            density,
            eta,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (g, b) = (self.priors.len(), self.grid.len());
        if g == 0 || b < 2 {
            return Err(Error::input("scenario needs a group and at least two grid points"));
        }
        if self.density.dim() != (g, b) || self.eta.dim() != (g, b) {
            return Err(Error::input("density/eta tables must be G x B"));
        }
        if (self.priors.iter().sum::<f64>() - 1.0).abs() > SUM_TOL {
            return Err(Error::input("priors must sum to 1"));
        }
        for row in self.density.rows() {
            if row.iter().any(|p| !(*p >= 0.0)) || (row.sum() - 1.0).abs() > SUM_TOL {
                return Err(Error::input("each density row must be a distribution over the grid"));
            }
        }
        if self.eta.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::input("eta entries must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn num_groups(&self) -> usize {
        self.priors.len()
    }

    pub fn num_bins(&self) -> usize {
        self.grid.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.grid[self.grid.len() - 1] - self.grid[0]) / (self.grid.len() - 1) as f64
    }

    /// Grid index whose bin contains `x`.
    pub fn bin_of(&self, x: f64) -> usize {
        let i = ((x - self.grid[0]) / self.bin_width()).round();
        (i.max(0.0) as usize).min(self.grid.len() - 1)
    }
}

/// Builds the tables for `params`.
pub fn make_figure1_scenario(params: &ScenarioParams) -> Result<ScenarioSpec> {
    params.validate()?;
    let b = params.grid_size;
    let step = (params.x_max - params.x_min) / (b - 1) as f64;
    let grid: Vec<f64> = (0..b).map(|i| params.x_min + i as f64 * step).collect();
    let g = params.num_groups();
    let mut density = Array2::zeros((g, b));
    let mut eta = Array2::zeros((g, b));
    for a in 0..g {
        let (m, w) = (params.means[a], params.widths[a]);
        let t = params.transition_of(a);
        for (i, &x) in grid.iter().enumerate() {
            let z = (x - m) / w;
            density[[a, i]] = (-0.5 * z * z).exp();
            eta[[a, i]] = if x < t {
                params.rho_low[a]
            } else {
                params.rho_high[a]
            };
        }
        let total = density.row(a).sum();
        if !(total > 0.0) {
            return Err(Error::input(format!("group {a}: density vanishes on the grid")));
        }
        density.row_mut(a).mapv_inplace(|p| p / total);
    }
    ScenarioSpec::new(grid, params.priors.clone(), density, eta)
}

/// Monte Carlo draw: `a ~ priors`, grid bin `~ p(x|a)` with `x` jittered uniformly
/// inside the bin, `y ~ Bernoulli(η_a(bin))`. Group names are "0", "1", ...
pub fn sample(spec: &ScenarioSpec, n: usize, seed: u64) -> Result<GroupedDataset> {
    if n == 0 {
        return Err(Error::input("sample size must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let group_dist = WeightedIndex::new(&spec.priors).map_err(|e| Error::input(e.to_string()))?;
    let bin_dists = spec
        .density
        .rows()
        .into_iter()
        .map(|row| WeightedIndex::new(row.iter().copied()).map_err(|e| Error::input(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let h = spec.bin_width();
    let (lo, hi) = (spec.grid[0], spec.grid[spec.grid.len() - 1]);

    let mut features = Array2::zeros((n, 1));
    let mut targets = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for i in 0..n {
        let a = group_dist.sample(&mut rng);
        let bin = bin_dists[a].sample(&mut rng);
        let jitter: f64 = rng.gen::<f64>() - 0.5;
        features[[i, 0]] = (spec.grid[bin] + jitter * h).clamp(lo, hi);
        let y = rng.gen::<f64>() < spec.eta[[a, bin]];
        targets.push(y as usize);
        groups.push(a);
    }
    let names = (0..spec.num_groups()).map(|a| a.to_string()).collect();
    GroupedDataset::new(features, targets, groups, names, 2)
}

/// Predicted `P(y = 1)` at every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorTable {
    pub g: Vec<f64>,
}

impl PredictorTable {
    pub fn new(g: Vec<f64>) -> Result<Self> {
        if g.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::input("predictor values must lie in [0, 1]"));
        }
        Ok(Self { g })
    }

    pub fn predict(&self, spec: &ScenarioSpec, x: f64) -> f64 {
        self.g[spec.bin_of(x)]
    }
}

/// Exact Brier group risks `Σₓ p(x|a) [η 2(1−g)² + (1−η) 2g²]`.
pub fn exact_group_risks(spec: &ScenarioSpec, table: &PredictorTable) -> Result<RiskVector> {
    if table.g.len() != spec.num_bins() {
        return Err(Error::Dimension {
            expected: spec.num_bins(),
            got: table.g.len(),
        });
    }
    let risks = (0..spec.num_groups())
        .map(|a| {
            spec.density
                .row(a)
                .iter()
                .zip(spec.eta.row(a))
                .zip(&table.g)
                .map(|((&p, &e), &g)| p * (e * 2.0 * (1.0 - g).powi(2) + (1.0 - e) * 2.0 * g * g))
                .sum()
        })
        .collect();
    Ok(RiskVector::new(risks))
}

/// Smallest achievable Brier risk per group: `Σₓ p(x|a) 2η(1−η)`.
pub fn bayes_noise(spec: &ScenarioSpec) -> RiskVector {
    let risks = (0..spec.num_groups())
        .map(|a| {
            spec.density
                .row(a)
                .iter()
                .zip(spec.eta.row(a))
                .map(|(&p, &e)| p * 2.0 * e * (1.0 - e))
                .sum()
        })
        .collect();
    RiskVector::new(risks)
}

fn check_simplex(lambda: &[f64], g: usize) -> Result<()> {
    if lambda.len() != g {
        return Err(Error::Dimension {
            expected: g,
            got: lambda.len(),
        });
    }
    if lambda.iter().any(|l| !(*l >= 0.0)) || (lambda.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::input("lambda must lie on the probability simplex"));
    }
    Ok(())
}

/// Pointwise minimiser of `Σₐ λₐ Rₐ`: `g(x) = Σ λₐ p(x|a) ηₐ(x) / Σ λₐ p(x|a)`,
/// and 0.5 where the weighted density vanishes.
pub fn scalarized_bayes_predictor(spec: &ScenarioSpec, lambda: &[f64]) -> Result<PredictorTable> {
    check_simplex(lambda, spec.num_groups())?;
    let g = (0..spec.num_bins())
        .map(|i| {
            let den: f64 = (0..lambda.len()).map(|a| lambda[a] * spec.density[[a, i]]).sum();
            if den > 0.0 {
                (0..lambda.len())
                    .map(|a| (lambda[a] * spec.density[[a, i]] / den) * spec.eta[[a, i]])
                    .sum::<f64>()
                    .clamp(0.0, 1.0)
            } else {
                0.5
            }
        })
        .collect();
    Ok(PredictorTable { g })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontPoint {
    pub lambda: Vec<f64>,
    pub risks: RiskVector,
    pub max_gap: f64,
}

impl FrontPoint {
    pub fn mean_risk(&self) -> f64 {
        self.risks.mean()
    }
}

/// Lattice on the simplex with `steps` subdivisions per axis, in lexicographic order of λ.
fn simplex_lattice(g: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(g: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == g {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(g, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut counts = Vec::new();
    rec(g, steps, &mut Vec::new(), &mut counts);
    counts
        .into_iter()
        .map(|c| c.into_iter().map(|k| k as f64 / steps as f64).collect())
        .collect()
}

/// Evaluates scalarised predictors over a simplex grid with `num_lambda` points per
/// axis, keeps the non-dominated ones, and sorts them by first-group risk.
pub fn trace_front(spec: &ScenarioSpec, num_lambda: usize) -> Result<Vec<FrontPoint>> {
    if num_lambda < 3 {
        return Err(Error::input("num_lambda must be at least 3"));
    }
    let g = spec.num_groups();
    let lambdas = if g == 1 {
        vec![vec![1.0]]
    } else {
        simplex_lattice(g, num_lambda - 1)
    };
    let mut points = Vec::with_capacity(lambdas.len());
    for lambda in lambdas {
        let table = scalarized_bayes_predictor(spec, &lambda)?;
        let risks = exact_group_risks(spec, &table)?;
        let max_gap = risks.max_gap();
        points.push(FrontPoint {
            lambda,
            risks,
            max_gap,
        });
    }
    let mut front = prune_dominated(points);
    front.sort_by(|p, q| {
        p.risks
            .risks
            .partial_cmp(&q.risks.risks)
            .expect("finite risks")
    });
    Ok(front)
}

/// Drops dominated points and exact duplicates, keeping the first occurrence.
fn prune_dominated(points: Vec<FrontPoint>) -> Vec<FrontPoint> {
    let mut keep: Vec<FrontPoint> = Vec::new();
    for p in points {
        let r = &p.risks.risks;
        if keep
            .iter()
            .any(|q| q.risks.risks == *r || dominates(&q.risks.risks, r).unwrap_or(false))
        {
            continue;
        }
        keep.retain(|q| !dominates(r, &q.risks.risks).unwrap_or(false));
        keep.push(p);
    }
    keep
}

/// Front point with the smallest max gap; ties go to the smaller mean risk.
pub fn pareto_fair_point(front: &[FrontPoint]) -> Result<FrontPoint> {
    front
        .iter()
        .min_by(|p, q| {
            p.max_gap
                .partial_cmp(&q.max_gap)
                .unwrap()
                .then(p.mean_risk().partial_cmp(&q.mean_risk()).unwrap())
        })
        .cloned()
        .ok_or_else(|| Error::input("empty front"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePoints {
    /// Minimiser of the population-weighted risk (λ = priors).
    pub naive: RiskVector,
    /// Minimiser of the unweighted mean group risk (λ uniform).
    pub rebalanced: RiskVector,
    pub pareto_fair: FrontPoint,
    /// Every group degraded to the worst Pareto-fair risk.
    pub equality_of_risk: RiskVector,
}

impl ReferencePoints {
    pub fn named(&self) -> Vec<(&'static str, &RiskVector)> {
        vec![
            ("naive", &self.naive),
            ("rebalanced", &self.rebalanced),
            ("pareto_fair", &self.pareto_fair.risks),
            ("equality_of_risk", &self.equality_of_risk),
        ]
    }
}

pub fn reference_points(spec: &ScenarioSpec, front: &[FrontPoint]) -> Result<ReferencePoints> {
    let g = spec.num_groups();
    let naive = exact_group_risks(spec, &scalarized_bayes_predictor(spec, &spec.priors)?)?;
    let uniform = vec![1.0 / g as f64; g];
    let rebalanced = exact_group_risks(spec, &scalarized_bayes_predictor(spec, &uniform)?)?;
    let pareto_fair = pareto_fair_point(front)?;
    let worst = pareto_fair.risks.max();
    Ok(ReferencePoints {
        naive,
        rebalanced,
        pareto_fair,
        equality_of_risk: RiskVector::new(vec![worst; g]),
    })
}

/// `(mean risk, max gap)` for every front point, sorted by gap.
pub fn disparity_tradeoff(front: &[FrontPoint]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = front.iter().map(|p| (p.mean_risk(), p.max_gap)).collect();
    out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.partial_cmp(&b.0).unwrap()));
    out
}

/// Lower envelope of the trade-off curve: the best mean risk attainable within each gap budget.
pub fn tradeoff_envelope(curve: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for &(mean, gap) in curve {
        if out.last().is_none_or(|&(m, _)| mean < m) {
            out.push((mean, gap));
        }
    }
    out
}

/// Front CSV: `lambda_0..,r_0..,max_gap,mean_risk`.
pub fn front_csv(front: &[FrontPoint]) -> String {
    let g = front.first().map_or(0, |p| p.risks.len());
    let mut s = String::new();
    let cols: Vec<String> = (0..g)
        .map(|a| format!("lambda_{a}"))
        .chain((0..g).map(|a| format!("r_{a}")))
        .collect();
    writeln!(s, "{},max_gap,mean_risk", cols.join(",")).unwrap();
    for p in front {
        let vals: Vec<String> = p
            .lambda
            .iter()
            .chain(&p.risks.risks)
            .map(|v| v.to_string())
            .collect();
        writeln!(s, "{},{},{}", vals.join(","), p.max_gap, p.mean_risk()).unwrap();
    }
    s
}

/// Reference CSV: `name,r_0..,max_gap,mean_risk`.
pub fn reference_csv(refs: &ReferencePoints) -> String {
    let g = refs.naive.len();
    let mut s = String::from("name");
    for a in 0..g {
        write!(s, ",r_{a}").unwrap();
    }
    s.push_str(",max_gap,mean_risk\n");
    for (name, r) in refs.named() {
        write!(s, "{name}").unwrap();
        for v in &r.risks {
            write!(s, ",{v}").unwrap();
        }
        writeln!(s, ",{},{}", r.max_gap(), r.mean()).unwrap();
    }
    s
}

pub fn tradeoff_csv(curve: &[(f64, f64)]) -> String {
    let mut s = String::from("mean_risk,max_gap\n");
    for (m, g) in curve {
        writeln!(s, "{m},{g}").unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_spec(eta: f64) -> ScenarioSpec {
        let b = 5;
        ScenarioSpec::new(
            (0..b).map(|i| i as f64).collect(),
            vec![1.0],
            Array2::from_elem((1, b), 1.0 / b as f64),
            Array2::from_elem((1, b), eta),
        )
        .unwrap()
    }

    #[test]
    fn constructor_contract() {
        let spec = make_figure1_scenario(&ScenarioParams::asymmetric()).unwrap();
        for a in 0..2 {
            let row = spec.density.row(a);
            assert!((row.sum() - 1.0).abs() < 1e-9);
            let p = ScenarioParams::asymmetric();
            assert!(spec
                .eta
                .row(a)
                .iter()
                .all(|&e| e == p.rho_low[a] || e == p.rho_high[a]));
            // Exactly one transition per group.
            let switches = spec
                .eta
                .row(a)
                .windows(2)
                .into_iter()
                .filter(|w| w[0] != w[1])
                .count();
            assert_eq!(switches, 1);
        }
        let sym = make_figure1_scenario(&ScenarioParams::symmetric()).unwrap();
        assert_eq!(sym.density.row(0), sym.density.row(1));
        assert_eq!(sym.eta.row(0), sym.eta.row(1));
    }

    #[test]
    fn constructor_rejects_bad_parameters() {
        let mut p = ScenarioParams::asymmetric();
        p.rho_low[0] = 0.95;
        assert!(make_figure1_scenario(&p).is_err());
        let mut p = ScenarioParams::asymmetric();
        p.delta[1] = 0.5;
        assert!(make_figure1_scenario(&p).is_err());
        let mut p = ScenarioParams::asymmetric();
        p.priors = vec![0.5, 0.6];
        assert!(make_figure1_scenario(&p).is_err());
    }

    #[test]
    fn noisier_levels_have_more_bayes_noise() {
        let noise = bayes_noise(&make_figure1_scenario(&ScenarioParams::asymmetric()).unwrap());
        assert!(noise.risks[1] > noise.risks[0]);
    }

    #[test]
    fn bayes_noise_examples() {
        assert!((bayes_noise(&constant_spec(0.5)).risks[0] - 0.5).abs() < 1e-12);
        assert_eq!(bayes_noise(&constant_spec(0.0)).risks[0], 0.0);
        assert_eq!(bayes_noise(&constant_spec(1.0)).risks[0], 0.0);
        for t in [0.3, 0.5, 0.7] {
            let p = ScenarioParams {
                priors: vec![1.0],
                means: vec![0.5],
                widths: vec![0.2],
                rho_low: vec![0.3],
                rho_high: vec![0.7],
                transition: t,
                delta: vec![0.0],
                ..ScenarioParams::asymmetric()
            };
            let n = bayes_noise(&make_figure1_scenario(&p).unwrap());
            assert!((n.risks[0] - 0.42).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_risk_examples() {
        let spec = constant_spec(0.1);
        let r = exact_group_risks(&spec, &PredictorTable::new(vec![0.1; 5]).unwrap()).unwrap();
        assert!((r.risks[0] - 0.18).abs() < 1e-12);
        let spec = make_figure1_scenario(&ScenarioParams {
            priors: vec![1.0],
            means: vec![0.4],
            widths: vec![0.15],
            rho_low: vec![0.2],
            rho_high: vec![0.6],
            delta: vec![0.0],
            ..ScenarioParams::asymmetric()
        })
        .unwrap();
        let table = PredictorTable::new(spec.eta.row(0).to_vec()).unwrap();
        let r = exact_group_risks(&spec, &table).unwrap();
        let direct: f64 = (0..spec.num_bins())
            .map(|i| spec.density[[0, i]] * 2.0 * spec.eta[[0, i]] * (1.0 - spec.eta[[0, i]]))
            .sum();
        assert!((r.risks[0] - direct).abs() < 1e-15);
        assert!(PredictorTable::new(vec![1.5]).is_err());
    }

    #[test]
    fn scalarization_examples() {
        let single = make_figure1_scenario(&ScenarioParams {
            priors: vec![1.0],
            means: vec![0.4],
            widths: vec![0.15],
            rho_low: vec![0.2],
            rho_high: vec![0.6],
            delta: vec![0.0],
            ..ScenarioParams::asymmetric()
        })
        .unwrap();
        let g = scalarized_bayes_predictor(&single, &[1.0]).unwrap();
        assert_eq!(g.g, single.eta.row(0).to_vec());

        // Identical densities: densities cancel, g is the λ-mix of the η rows.
        let p = ScenarioParams {
            means: vec![0.5, 0.5],
            ..ScenarioParams::asymmetric()
        };
        let spec = make_figure1_scenario(&p).unwrap();
        let g = scalarized_bayes_predictor(&spec, &[0.25, 0.75]).unwrap();
        for i in 0..spec.num_bins() {
            let mix = 0.25 * spec.eta[[0, i]] + 0.75 * spec.eta[[1, i]];
            assert!((g.g[i] - mix).abs() < 1e-12);
        }
        assert!(scalarized_bayes_predictor(&spec, &[0.5, 0.6]).is_err());
    }

    #[test]
    fn single_group_front_is_bayes_noise() {
        let spec = constant_spec(0.3);
        let front = trace_front(&spec, 11).unwrap();
        assert_eq!(front.len(), 1);
        assert!((front[0].risks.risks[0] - 0.42).abs() < 1e-12);
        assert!(trace_front(&spec, 2).is_err());
    }

    #[test]
    fn front_is_sorted_and_mutually_non_dominated() {
        let spec = make_figure1_scenario(&ScenarioParams::asymmetric()).unwrap();
        let front = trace_front(&spec, 101).unwrap();
        assert!(front.len() > 10);
        for w in front.windows(2) {
            assert!(w[0].risks.risks[0] <= w[1].risks.risks[0]);
        }
        for p in &front {
            for q in &front {
                assert!(!dominates(&p.risks.risks, &q.risks.risks).unwrap());
            }
        }
    }

    #[test]
    fn simplex_lattice_for_three_groups() {
        let l = simplex_lattice(3, 2);
        assert_eq!(l.len(), 6);
        assert!(l.iter().all(|v| (v.iter().sum::<f64>() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn pareto_fair_point_prefers_small_gap_then_mean() {
        let fp = |r: Vec<f64>| FrontPoint {
            lambda: vec![0.5, 0.5],
            max_gap: RiskVector::new(r.clone()).max_gap(),
            risks: RiskVector::new(r),
        };
        let front = vec![fp(vec![0.1, 0.5]), fp(vec![0.3, 0.4]), fp(vec![0.2, 0.3])];
        assert_eq!(pareto_fair_point(&front).unwrap().risks.risks, vec![0.2, 0.3]);
        assert_eq!(pareto_fair_point(&front[..1]).unwrap(), front[0]);
        assert!(pareto_fair_point(&[]).is_err());
    }

    #[test]
    fn majority_weighting_hurts_the_minority() {
        let p = ScenarioParams {
            priors: vec![0.9, 0.1],
            ..ScenarioParams::asymmetric()
        };
        let spec = make_figure1_scenario(&p).unwrap();
        let front = trace_front(&spec, 101).unwrap();
        let refs = reference_points(&spec, &front).unwrap();
        assert!(refs.naive.risks[1] > refs.rebalanced.risks[1]);
        assert_eq!(refs.equality_of_risk.max_gap(), 0.0);
        for a in 0..2 {
            assert!(refs.pareto_fair.risks.risks[a] <= refs.equality_of_risk.risks[a]);
        }
    }

    #[test]
    fn tradeoff_envelope_is_monotone() {
        let spec = make_figure1_scenario(&ScenarioParams::asymmetric()).unwrap();
        let front = trace_front(&spec, 201).unwrap();
        let curve = disparity_tradeoff(&front);
        assert_eq!(curve.len(), front.len());
        let env = tradeoff_envelope(&curve);
        for w in env.windows(2) {
            assert!(w[1].0 < w[0].0 && w[1].1 >= w[0].1);
        }
        // The envelope ends at the smallest mean risk on the front.
        let best_mean = curve.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
        assert_eq!(env.last().unwrap().0, best_mean);
    }

    #[test]
    fn scenario_file_round_trip() {
        let p = ScenarioParams::asymmetric();
        let kv = KvFile::parse(&p.to_kv_string(), Path::new("s.kv")).unwrap();
        assert_eq!(ScenarioParams::from_kv(&kv).unwrap(), p);
    }

    #[test]
    fn sampling_is_seeded() {
        let spec = make_figure1_scenario(&ScenarioParams::asymmetric()).unwrap();
        let a = sample(&spec, 500, 4).unwrap();
        assert_eq!(a, sample(&spec, 500, 4).unwrap());
        assert_ne!(a, sample(&spec, 500, 5).unwrap());
        assert!(a.features.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn csv_headers() {
        let spec = make_figure1_scenario(&ScenarioParams::asymmetric()).unwrap();
        let front = trace_front(&spec, 5).unwrap();
        assert!(front_csv(&front).starts_with("lambda_0,lambda_1,r_0,r_1,max_gap,mean_risk\n"));
        let refs = reference_points(&spec, &front).unwrap();
        let csv = reference_csv(&refs);
        assert!(csv.starts_with("name,r_0,r_1,max_gap,mean_risk\nnaive,"));
        assert_eq!(csv.lines().count(), 5);
    }
}
