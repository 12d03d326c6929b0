use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Features, targets and sensitive-group labels for `n` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedDataset {
    pub features: Array2<f64>,
    pub targets: Vec<usize>,
    pub groups: Vec<usize>,
    pub group_names: Vec<String>,
    pub num_classes: usize,
}

impl GroupedDataset {
    pub fn new(
        features: Array2<f64>,
        targets: Vec<usize>,
        groups: Vec<usize>,
        group_names: Vec<String>,
        num_classes: usize,
    ) -> Result<Self> {
        let ds = Self {
            features,
            targets,
            groups,
            group_names,
            num_classes,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.features.nrows();
        if n == 0 {
            return Err(Error::input("dataset is empty"));
        }
        if self.targets.len() != n || self.groups.len() != n {
            return Err(Error::input(format!(
                "length mismatch: {} feature rows, {} targets, {} groups",
                n,
                self.targets.len(),
                self.groups.len()
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::input("need at least two classes"));
        }
        if let Some(&t) = self.targets.iter().find(|&&t| t >= self.num_classes) {
            return Err(Error::input(format!("target {t} out of range")));
        }
        if self.group_names.is_empty() {
            return Err(Error::input("no groups"));
        }
        let counts = self.group_counts_unchecked();
        if counts.len() > self.group_names.len() {
            return Err(Error::input(format!(
                "group id {} out of range",
                counts.len() - 1
            )));
        }
        if let Some(a) = (0..self.group_names.len()).find(|&a| counts.get(a).copied().unwrap_or(0) == 0) {
            return Err(Error::EmptyGroup(a));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("non-finite feature value"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_groups(&self) -> usize {
        self.group_names.len()
    }

    fn group_counts_unchecked(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.group_names.len()];
        for &a in &self.groups {
            if a >= counts.len() {
                counts.resize(a + 1, 0);
            }
            counts[a] += 1;
        }
        counts
    }

    pub fn group_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_groups()];
        for &a in &self.groups {
            counts[a] += 1;
        }
        counts
    }

    /// Fraction of samples in each group.
    pub fn group_ratios(&self) -> Vec<f64> {
        let n = self.len() as f64;
        self.group_counts().into_iter().map(|c| c as f64 / n).collect()
    }

    /// Sample indices of each group, in dataset order.
    pub fn group_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_groups()];
        for (i, &a) in self.groups.iter().enumerate() {
            out[a].push(i);
        }
        out
    }

    /// Rows at `idx`, keeping the group set. Fails if a group ends up empty.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        Self::new(
            self.features.select(Axis(0), idx),
            idx.iter().map(|&i| self.targets[i]).collect(),
            idx.iter().map(|&i| self.groups[i]).collect(),
            self.group_names.clone(),
            self.num_classes,
        )
    }

    /// Split stratified by (group, target) cell. Fractions must be positive and sum to 1.
    pub fn stratified_split(&self, fractions: &[f64], seed: u64) -> Result<Vec<Self>> {
        if fractions.is_empty() || fractions.iter().any(|&f| f <= 0.0) {
            return Err(Error::input("split fractions must be positive"));
        }
        let total: f64 = fractions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::input(format!("split fractions sum to {total}, not 1")));
        }
        let mut cells = vec![Vec::new(); self.num_groups() * self.num_classes];
        for i in 0..self.len() {
            cells[self.groups[i] * self.num_classes + self.targets[i]].push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut parts = vec![Vec::new(); fractions.len()];
        for cell in &mut cells {
            cell.shuffle(&mut rng);
            let n = cell.len() as f64;
            let mut start = 0usize;
            let mut cum = 0.0;
            for (p, f) in fractions.iter().enumerate() {
                cum += f;
                let end = if p + 1 == fractions.len() {
                    cell.len()
                } else {
                    ((cum * n).round() as usize).min(cell.len())
                };
                parts[p].extend_from_slice(&cell[start..end.max(start)]);
                start = end.max(start);
            }
        }
        parts
            .into_iter()
            .enumerate()
            .map(|(p, mut idx)| {
                idx.sort_unstable();
                self.subset(&idx).map_err(|e| match e {
                    Error::EmptyGroup(a) => Error::input(format!(
                        "split {p} has no samples of group '{}'",
                        self.group_names[a]
                    )),
                    other => other,
                })
            })
            .collect()
    }
}

/// Orders group labels numerically when every label is an integer, lexically otherwise.
fn sort_labels(labels: &mut [String]) {
    if labels.iter().all(|l| l.parse::<i64>().is_ok()) {
        labels.sort_by_key(|l| l.parse::<i64>().unwrap());
    } else {
        labels.sort();
    }
}

impl GroupedDataset {
    /// Reads a CSV with header `f0..f{d-1},target,group` (any column order).
    /// Group labels are mapped to ids in sorted label order.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let perr = |line: u64, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .flexible(true)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => perr(0, format!("{other:?}")),
            })?;
        let headers = rdr.headers()?.clone();
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let target_col = find("target").ok_or_else(|| perr(1, "missing column 'target'".into()))?;
        let group_col = find("group").ok_or_else(|| perr(1, "missing column 'group'".into()))?;
        let mut feature_cols = Vec::new();
        for (j, h) in headers.iter().enumerate() {
            let h = h.trim();
            if j == target_col || j == group_col {
                continue;
            }
            let idx = h
                .strip_prefix('f')
                .and_then(|d| d.parse::<usize>().ok())
                .ok_or_else(|| perr(1, format!("unexpected column '{h}'")))?;
            feature_cols.push((idx, j));
        }
        feature_cols.sort_unstable();
        for (want, &(idx, _)) in feature_cols.iter().enumerate() {
            if idx != want {
                return Err(perr(1, format!("missing column 'f{want}'")));
            }
        }
        let d = feature_cols.len();
        if d == 0 {
            return Err(perr(1, "no feature columns".into()));
        }

        let mut values = Vec::new();
        let mut targets = Vec::new();
        let mut labels = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != headers.len() {
                return Err(perr(
                    line,
                    format!("expected {} fields, found {}", headers.len(), rec.len()),
                ));
            }
            for &(idx, j) in &feature_cols {
                let cell = rec[j].trim();
                let v: f64 = cell
                    .parse()
                    .map_err(|_| perr(line, format!("non-numeric value '{cell}' in column 'f{idx}'")))?;
                values.push(v);
            }
            let cell = rec[target_col].trim();
            targets.push(
                cell.parse::<usize>()
                    .map_err(|_| perr(line, format!("bad target label '{cell}'")))?,
            );
            labels.push(rec[group_col].trim().to_string());
        }
        if targets.is_empty() {
            return Err(perr(2, "no data rows".into()));
        }
        let mut names = labels.clone();
        sort_labels(&mut names);
        names.dedup();
        let groups = labels
            .iter()
            .map(|l| names.iter().position(|n| n == l).unwrap())
            .collect();
        let num_classes = targets.iter().copied().max().unwrap_or(0).max(1) + 1;
        let features = Array2::from_shape_vec((targets.len(), d), values)
            .map_err(|e| Error::input(e.to_string()))?;
        Self::new(features, targets, groups, names, num_classes)
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::new();
        for j in 0..self.num_features() {
            write!(s, "f{j},").unwrap();
        }
        s.push_str("target,group\n");
        for (i, row) in self.features.rows().into_iter().enumerate() {
            for v in row {
                write!(s, "{v},").unwrap();
            }
            writeln!(s, "{},{}", self.targets[i], self.group_names[self.groups[i]]).unwrap();
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}
