//! Implementations behind the `paretofair` subcommands. Each writes plain-text
//! outputs into a directory (or file, for `synth`) and is deterministic per seed.

use std::path::{Path, PathBuf};

use crate::baselines::{apply_rule, decisions, fit_equalizing_rule, RandomizedGroupRule};
use crate::dataset::GroupedDataset;
use crate::error::{Error, Result};
use crate::experiment::{run_experiment, ExperimentConfig, ExperimentResult};
use crate::kv::KvFile;
use crate::model::Model;
use crate::oracle::{
    disparity_tradeoff, front_csv, make_figure1_scenario, reference_csv, reference_points, sample,
    trace_front, tradeoff_csv, tradeoff_envelope, ReferencePoints, ScenarioParams,
};
use crate::pareto::trace_csv;
use crate::report::{combined_csv, parse_metrics, text_table, MethodMetrics};

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn load_scenario(path: Option<&Path>) -> Result<ScenarioParams> {
    match path {
        Some(p) => ScenarioParams::load(p),
        None => Ok(ScenarioParams::default()),
    }
}

/// Samples `n` points and writes them as a dataset CSV.
pub fn cmd_synth(scenario: &ScenarioParams, n: usize, seed: u64, out: &Path) -> Result<GroupedDataset> {
    let ds = sample(&make_figure1_scenario(scenario)?, n, seed)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    ds.write_csv(out)?;
    Ok(ds)
}

/// Writes `front.csv`, `reference.csv`, `tradeoff.csv` and a copy of the scenario.
pub fn cmd_oracle(scenario: &ScenarioParams, num_lambda: usize, out_dir: &Path) -> Result<ReferencePoints> {
    let spec = make_figure1_scenario(scenario)?;
    let front = trace_front(&spec, num_lambda)?;
    let refs = reference_points(&spec, &front)?;
    ensure_dir(out_dir)?;
    write(&out_dir.join("front.csv"), &front_csv(&front))?;
    write(&out_dir.join("reference.csv"), &reference_csv(&refs))?;
    let curve = tradeoff_envelope(&disparity_tradeoff(&front));
    write(&out_dir.join("tradeoff.csv"), &tradeoff_csv(&curve))?;
    write(&out_dir.join("scenario.cfg"), &scenario.to_kv_string())?;
    Ok(refs)
}

/// Reads an experiment config (or defaults) and applies command-line overrides.
pub fn experiment_config(
    config: Option<&Path>,
    seed: Option<u64>,
    out: Option<&Path>,
    method: Option<&str>,
) -> Result<ExperimentConfig> {
    let mut kv = match config {
        Some(p) => KvFile::load(p)?,
        None => KvFile::default(),
    };
    if let Some(s) = seed {
        kv.set("seed", s.to_string());
    }
    if let Some(m) = method {
        kv.set("method", m);
    }
    let mut cfg = ExperimentConfig::from_kv(&kv)?;
    if let Some(o) = out {
        cfg.out = Some(o.to_path_buf());
    }
    Ok(cfg)
}

/// Writes `model.ckpt`, `metrics.csv` (test split), `test.csv` and, for the
/// Pareto-fair method, `trace.csv`.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let out_dir: PathBuf = cfg
        .out
        .clone()
        .ok_or_else(|| Error::Usage("no output directory (pass --out or set 'out')".into()))?;
    let res = run_experiment(cfg)?;
    ensure_dir(&out_dir)?;
    res.model.save(&out_dir.join("model.ckpt"))?;
    write(&out_dir.join("metrics.csv"), &res.metrics.to_csv()?)?;
    res.test.write_csv(&out_dir.join("test.csv"))?;
    if !res.trace.is_empty() {
        write(&out_dir.join("trace.csv"), &trace_csv(&res.trace))?;
    }
    Ok(res)
}

#[derive(Debug, Clone)]
pub struct PostprocOutcome {
    pub rule: RandomizedGroupRule,
    pub before: MethodMetrics,
    pub after: MethodMetrics,
}

/// Fits the equalizing rule on the model's decisions for `data` (or loads `rule`),
/// applies it with `seed`, and writes `rule.csv` plus `metrics.csv` for the
/// post-processed classifier (method name `<method>_post`).
pub fn cmd_postproc(
    checkpoint: &Path,
    data: &Path,
    seed: u64,
    method: &str,
    rule: Option<&Path>,
    out_dir: &Path,
) -> Result<PostprocOutcome> {
    let model = Model::load(checkpoint)?;
    let ds = GroupedDataset::load_csv(data)?;
    postprocess(&model, &ds, seed, method, rule, Some(out_dir))
}

pub fn postprocess(
    model: &Model,
    ds: &GroupedDataset,
    seed: u64,
    method: &str,
    rule: Option<&Path>,
    out_dir: Option<&Path>,
) -> Result<PostprocOutcome> {
    if ds.num_classes != 2 || model.num_classes() != 2 {
        return Err(Error::input("post-processing needs a binary task"));
    }
    let probs = model.forward(ds.features.view())?;
    let base = decisions(probs.view());
    let before = MethodMetrics::from_predictions(method, probs.view(), &base, ds)?;
    let rule = match rule {
        Some(p) => RandomizedGroupRule::from_csv(p, &ds.group_names)?,
        None => {
            let correct: Vec<bool> = base.iter().zip(&ds.targets).map(|(d, t)| d == t).collect();
            fit_equalizing_rule(&base, &correct, &ds.groups, ds.num_groups())?
        }
    };
    let post = apply_rule(&rule, &base, &ds.groups, seed);
    // Probabilities of the randomised classifier: keep·p + (1 − keep)·½.
    let mut mixed = probs;
    for (mut row, &a) in mixed.rows_mut().into_iter().zip(&ds.groups) {
        let k = rule.keep_prob[a];
        row.mapv_inplace(|p| k * p + (1.0 - k) * 0.5);
    }
    let after = MethodMetrics::from_predictions(&format!("{method}_post"), mixed.view(), &post, ds)?;
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        write(&dir.join("rule.csv"), &rule.to_csv(&ds.group_names))?;
        write(&dir.join("metrics.csv"), &after.to_csv()?)?;
    }
    Ok(PostprocOutcome { rule, before, after })
}

/// Combines metrics files into `report.csv` and `report.txt`; returns the text table.
pub fn cmd_report(inputs: &[PathBuf], out_dir: Option<&Path>) -> Result<String> {
    if inputs.is_empty() {
        return Err(Error::Usage("report needs at least one metrics CSV".into()));
    }
    let mut methods = Vec::new();
    for p in inputs {
        methods.extend(parse_metrics(p)?);
    }
    let table = text_table(&methods)?;
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        write(&dir.join("report.csv"), &combined_csv(&methods)?)?;
        write(&dir.join("report.txt"), &table)?;
    }
    Ok(table)
}
