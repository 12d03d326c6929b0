//! Per-group accuracy / Brier tables.
//!
//! Metrics CSV columns: `method,group,ratio,accuracy,brier,n`. After the group rows of
//! each method come three summary rows whose `group` is `__sample_mean`,
//! `__group_mean` or `__discrepancy`; their `ratio` is 1 and `n` is the method total.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::ArrayView2;

use crate::baselines::decisions;
use crate::dataset::GroupedDataset;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::risk::{brier_loss, metric_summary, MetricSummary};

pub const SAMPLE_MEAN: &str = "__sample_mean";
pub const GROUP_MEAN: &str = "__group_mean";
pub const DISCREPANCY: &str = "__discrepancy";

const HEADER: [&str; 6] = ["method", "group", "ratio", "accuracy", "brier", "n"];

#[derive(Debug, Clone, PartialEq)]
pub struct GroupMetrics {
    pub group: String,
    pub ratio: f64,
    pub accuracy: f64,
    pub brier: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodMetrics {
    pub method: String,
    pub groups: Vec<GroupMetrics>,
}

impl MethodMetrics {
    /// `probs` gives the Brier term; `decided` the hard decisions scored for accuracy.
    pub fn from_predictions(
        method: &str,
        probs: ArrayView2<'_, f64>,
        decided: &[usize],
        data: &GroupedDataset,
    ) -> Result<Self> {
        if probs.nrows() != data.len() || decided.len() != data.len() {
            return Err(Error::Dimension {
                expected: data.len(),
                got: probs.nrows().min(decided.len()),
            });
        }
        let g = data.num_groups();
        let mut hits = vec![0usize; g];
        let mut brier = vec![0.0; g];
        for (i, row) in probs.rows().into_iter().enumerate() {
            let a = data.groups[i];
            let y = data.targets[i];
            hits[a] += (decided[i] == y) as usize;
            brier[a] += brier_loss(&row.to_vec(), y)?;
        }
        let counts = data.group_counts();
        let ratios = data.group_ratios();
        let groups = (0..g)
            .map(|a| GroupMetrics {
                group: data.group_names[a].clone(),
                ratio: ratios[a],
                accuracy: hits[a] as f64 / counts[a] as f64,
                brier: brier[a] / counts[a] as f64,
                n: counts[a],
            })
            .collect();
        Ok(Self {
            method: method.to_string(),
            groups,
        })
    }

    /// Scores a model with argmax decisions.
    pub fn evaluate(method: &str, model: &Model, data: &GroupedDataset) -> Result<Self> {
        let probs = model.forward(data.features.view())?;
        let decided = decisions(probs.view());
        Self::from_predictions(method, probs.view(), &decided, data)
    }

    pub fn group_names(&self) -> Vec<&str> {
        self.groups.iter().map(|g| g.group.as_str()).collect()
    }

    fn ratios(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.ratio).collect()
    }

    pub fn accuracy_summary(&self) -> Result<MetricSummary> {
        let acc: Vec<f64> = self.groups.iter().map(|g| g.accuracy).collect();
        metric_summary(&acc, &self.ratios())
    }

    pub fn brier_summary(&self) -> Result<MetricSummary> {
        let bs: Vec<f64> = self.groups.iter().map(|g| g.brier).collect();
        metric_summary(&bs, &self.ratios())
    }

    pub fn total(&self) -> usize {
        self.groups.iter().map(|g| g.n).sum()
    }

    fn write_rows(&self, s: &mut String) -> Result<()> {
        for g in &self.groups {
            writeln!(s, "{},{},{},{},{},{}", self.method, g.group, g.ratio, g.accuracy, g.brier, g.n).unwrap();
        }
        let acc = self.accuracy_summary()?;
        let bs = self.brier_summary()?;
        let n = self.total();
        for (name, a, b) in [
            (SAMPLE_MEAN, acc.sample_mean, bs.sample_mean),
            (GROUP_MEAN, acc.group_mean, bs.group_mean),
            (DISCREPANCY, acc.discrepancy, bs.discrepancy),
        ] {
            writeln!(s, "{},{name},1,{a},{b},{n}", self.method).unwrap();
        }
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        combined_csv(std::slice::from_ref(self))
    }
}

/// Parses a metrics CSV. Summary rows are recomputed from group rows, so they are skipped.
pub fn parse_metrics(path: &Path) -> Result<Vec<MethodMetrics>> {
    let perr = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => perr(0, format!("{other:?}")),
    })?;
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(perr(1, format!("expected header '{}'", HEADER.join(","))));
    }
    let mut out: Vec<MethodMetrics> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let group = &rec[1];
        if group.starts_with("__") {
            if ![SAMPLE_MEAN, GROUP_MEAN, DISCREPANCY].contains(&group) {
                return Err(perr(line, format!("unknown summary row '{group}'")));
            }
            continue;
        }
        let num = |j: usize| -> Result<f64> {
            rec[j]
                .parse()
                .map_err(|_| perr(line, format!("non-numeric {} '{}'", HEADER[j], &rec[j])))
        };
        let row = GroupMetrics {
            group: group.to_string(),
            ratio: num(2)?,
            accuracy: num(3)?,
            brier: num(4)?,
            n: rec[5]
                .parse()
                .map_err(|_| perr(line, format!("bad count '{}'", &rec[5])))?,
        };
        match out.iter_mut().find(|m| m.method == rec[0]) {
            Some(m) => m.groups.push(row),
            None => out.push(MethodMetrics {
                method: rec[0].to_string(),
                groups: vec![row],
            }),
        }
    }
    Ok(out)
}

fn check_groups(methods: &[MethodMetrics]) -> Result<()> {
    let first = methods
        .first()
        .ok_or_else(|| Error::Usage("no metrics to report".into()))?;
    let names = first.group_names();
    for m in &methods[1..] {
        if m.group_names() != names {
            return Err(Error::input(format!(
                "group sets differ: '{}' has [{}], '{}' has [{}]",
                first.method,
                names.join(", "),
                m.method,
                m.group_names().join(", ")
            )));
        }
    }
    Ok(())
}

pub fn combined_csv(methods: &[MethodMetrics]) -> Result<String> {
    check_groups(methods)?;
    let mut s = HEADER.join(",");
    s.push('\n');
    for m in methods {
        m.write_rows(&mut s)?;
    }
    Ok(s)
}

type Pick = fn(&MetricSummary) -> f64;

/// Aligned table: one row per group plus the three summaries, an Acc (%) and a BS
/// column per method.
pub fn text_table(methods: &[MethodMetrics]) -> Result<String> {
    check_groups(methods)?;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut head = vec![String::new()];
    for m in methods {
        head.push(format!("{} Acc", m.method));
        head.push(format!("{} BS", m.method));
    }
    rows.push(head);
    for (a, name) in methods[0].group_names().into_iter().enumerate() {
        let mut row = vec![name.to_string()];
        for m in methods {
            row.push(format!("{:.1}", 100.0 * m.groups[a].accuracy));
            row.push(format!("{:.3}", m.groups[a].brier));
        }
        rows.push(row);
    }
    let summaries = methods
        .iter()
        .map(|m| Ok((m.accuracy_summary()?, m.brier_summary()?)))
        .collect::<Result<Vec<_>>>()?;
    let pick: [(&str, Pick); 3] = [
        ("Sample Mean", |s| s.sample_mean),
        ("Group Mean", |s| s.group_mean),
        ("Discrepancy", |s| s.discrepancy),
    ];
    for (label, f) in pick {
        let mut row = vec![label.to_string()];
        for (acc, bs) in &summaries {
            row.push(format!("{:.1}", 100.0 * f(acc)));
            row.push(format!("{:.3}", f(bs)));
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|j| rows.iter().map(|r| r[j].len()).max().unwrap_or(0))
        .collect();
    let mut s = String::new();
    for row in &rows {
        let mut line = format!("{:<w$}", row[0], w = widths[0]);
        for (cell, w) in row.iter().zip(&widths).skip(1) {
            write!(line, "  {cell:>w$}").unwrap();
        }
        s.push_str(line.trim_end());
        s.push('\n');
    }
    Ok(s)
}
