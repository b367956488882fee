//! Tabular datasets: the biased synthetic generator, CSV ingestion, seeded
//! splits and per-column standardization.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::stats::SeededStream;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub n_features: usize,
    /// Share of group 0, the minority.
    pub minority_fraction: f64,
    /// Feature means of groups 0 and 1.
    pub group_means: [Vec<f64>; 2],
    /// Label-flip probability per group.
    pub group_label_flip: [f64; 2],
    /// Share of label 1 before flipping.
    pub class_balance: f64,
    /// Weights of the linear labelling score; `1/sqrt(d)` on every feature
    /// when absent.
    #[serde(default)]
    pub score_weights: Option<Vec<f64>>,
    pub master_seed: u64,
}

impl SyntheticSpec {
    /// Identical zero-mean groups, no label noise, balanced classes.
    pub fn new(n_samples: usize, n_features: usize, minority_fraction: f64, master_seed: u64) -> Self {
        Self {
            n_samples,
            n_features,
            minority_fraction,
            group_means: [vec![0.0; n_features], vec![0.0; n_features]],
            group_label_flip: [0.0, 0.0],
            class_balance: 0.5,
            score_weights: None,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 || self.n_features == 0 {
            return Err(Error::param("n_samples/n_features", "need at least 2 samples and 1 feature"));
        }
        if !(self.minority_fraction > 0.0 && self.minority_fraction <= 0.5) {
            return Err(Error::param(
                "minority_fraction",
                format!("must lie in (0, 0.5], got {}", self.minority_fraction),
            ));
        }
        if self.group_means.iter().any(|m| m.len() != self.n_features || m.iter().any(|x| !x.is_finite())) {
            return Err(Error::param("group_means", "need two finite vectors of length n_features"));
        }
        if self.group_label_flip.iter().any(|f| !(0.0..0.5).contains(f)) {
            return Err(Error::param("group_label_flip", "each flip rate must lie in [0, 0.5)"));
        }
        if !(self.class_balance > 0.0 && self.class_balance < 1.0) {
            return Err(Error::param("class_balance", "must lie in (0, 1)"));
        }
        if let Some(w) = &self.score_weights {
            if w.len() != self.n_features || w.iter().any(|x| !x.is_finite()) {
                return Err(Error::param("score_weights", "need a finite vector of length n_features"));
            }
        }
        Ok(())
    }

    pub fn minority_count(&self) -> usize {
        (self.minority_fraction * self.n_samples as f64).round() as usize
    }
}

/// Column mean and standard deviation used to standardize features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
}

impl Standardization {
    /// Population statistics over the given rows.
    pub fn fit(data: &TabularDataset, rows: &[usize]) -> Self {
        let d = data.n_features;
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for &r in rows {
            for (m, x) in mean.iter_mut().zip(data.row(r)) {
                *m += x / n;
            }
        }
        let mut var = vec![0.0; d];
        for &r in rows {
            for ((v, x), m) in var.iter_mut().zip(data.row(r)).zip(&mean) {
                *v += (x - m).powi(2) / n;
            }
        }
        let stddev: Vec<f64> = var.into_iter().map(f64::sqrt).collect();
        for (j, s) in stddev.iter().enumerate() {
            if *s == 0.0 {
                log::warn!("feature `{}` is constant on the training rows; standardized to 0", data.feature_names[j]);
            }
        }
        Self { mean, stddev }
    }

    /// `(x − mean) / sd`; constant columns map to 0.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.stddev)
            .map(|((x, m), s)| if *s > 0.0 { (x - m) / s } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularDataset {
    pub feature_names: Vec<String>,
    pub n_features: usize,
    /// Row-major, `n_samples × n_features`.
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
    pub groups: Vec<usize>,
    pub n_classes: usize,
    pub n_groups: usize,
    /// Original label strings, indexed by encoded class.
    pub class_names: Vec<String>,
    pub group_names: Vec<String>,
}

impl TabularDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn group_count(&self, g: usize) -> usize {
        self.groups.iter().filter(|&&x| x == g).count()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if n == 0 {
            return Err(Error::InvalidInput("dataset is empty".into()));
        }
        if self.features.len() != n * self.n_features || self.groups.len() != n {
            return Err(Error::InvalidInput("dataset columns differ in length".into()));
        }
        if self.features.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("dataset holds non-finite features".into()));
        }
        if self.labels.iter().any(|&y| y >= self.n_classes) || self.groups.iter().any(|&g| g >= self.n_groups) {
            return Err(Error::InvalidInput("label or group code out of range".into()));
        }
        if self.n_classes < 2 || self.n_groups < 2 {
            return Err(Error::InvalidInput("need at least two classes and two groups".into()));
        }
        Ok(())
    }

    /// Seeded train/test split, stratified by group so that every group is
    /// represented in both parts. Depends only on the seed and the dataset.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::param("test_fraction", "must lie in (0, 1)"));
        }
        let mut stream = SeededStream::new(seed, SPLIT_STREAM);
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for g in 0..self.n_groups {
            let mut members: Vec<usize> = (0..self.len()).filter(|&i| self.groups[i] == g).collect();
            stream.shuffle(&mut members);
            let n_test = if members.len() >= 2 {
                ((members.len() as f64 * test_fraction).round() as usize).clamp(1, members.len() - 1)
            } else {
                0
            };
            test.extend_from_slice(&members[..n_test]);
            train.extend_from_slice(&members[n_test..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        if train.is_empty() || test.is_empty() {
            return Err(Error::InsufficientData("too few samples for a train/test split".into()));
        }
        Ok((train, test))
    }
}

const SPLIT_STREAM: u64 = 0;

/// Draws a dataset with exactly `round(minority_fraction · n)` group-0 rows
/// in shuffled positions.
pub fn generate_synthetic(spec: &SyntheticSpec, stream: &mut SeededStream) -> Result<TabularDataset> {
    spec.validate()?;
    let n = spec.n_samples;
    let d = spec.n_features;
    let n_minority = spec.minority_count();
    let mut groups: Vec<usize> = (0..n).map(|i| usize::from(i >= n_minority)).collect();
    stream.shuffle(&mut groups);

    let mut features = Vec::with_capacity(n * d);
    for &g in &groups {
        for m in &spec.group_means[g] {
            features.push(m + stream.standard_normal());
        }
    }
    let default_w = vec![1.0 / (d as f64).sqrt(); d];
    let w = spec.score_weights.as_ref().unwrap_or(&default_w);
    let scores: Vec<f64> = features
        .chunks(d)
        .map(|x| x.iter().zip(w).map(|(a, b)| a * b).sum())
        .collect();
    // label 1 for the top `class_balance` share of scores
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let n_positive = (spec.class_balance * n as f64).round() as usize;
    let mut labels = vec![0usize; n];
    for &i in &order[n - n_positive..] {
        labels[i] = 1;
    }
    for (y, &g) in labels.iter_mut().zip(&groups) {
        if stream.bernoulli(spec.group_label_flip[g]) {
            *y = 1 - *y;
        }
    }
    Ok(TabularDataset {
        feature_names: (0..d).map(|j| format!("x{j}")).collect(),
        n_features: d,
        features,
        labels,
        groups,
        n_classes: 2,
        n_groups: 2,
        class_names: vec!["0".into(), "1".into()],
        group_names: vec!["0".into(), "1".into()],
    })
}

/// Column roles for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub features: Vec<String>,
    pub label: String,
    pub group: String,
}

/// Reads a headered CSV. Labels and groups are encoded by sorted distinct
/// value; features must be numeric. Standardization happens at training
/// time on the training split.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<TabularDataset> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let parse_err = |line: u64, message: String| Error::Parse {
        path: display.clone(),
        line,
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.is_empty() {
        return Err(parse_err(1, "file is empty".into()));
    }
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, format!("missing column `{name}`")))
    };
    let feature_cols = schema.features.iter().map(|f| column(f)).collect::<Result<Vec<_>>>()?;
    if feature_cols.is_empty() {
        return Err(Error::param("features", "schema names no feature columns"));
    }
    let label_col = column(&schema.label)?;
    let group_col = column(&schema.group)?;

    let mut features = Vec::new();
    let mut raw_labels = Vec::new();
    let mut raw_groups = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        for (name, &c) in schema.features.iter().zip(&feature_cols) {
            let cell = rec.get(c).unwrap_or("");
            let x: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, format!("column `{name}`: `{cell}` is not a number")))?;
            if !x.is_finite() {
                return Err(parse_err(line, format!("column `{name}`: non-finite value")));
            }
            features.push(x);
        }
        for (c, name, out) in [
            (label_col, &schema.label, &mut raw_labels),
            (group_col, &schema.group, &mut raw_groups),
        ] {
            let cell = rec.get(c).unwrap_or("");
            if cell.is_empty() {
                return Err(parse_err(line, format!("column `{name}` is empty")));
            }
            out.push(cell.to_string());
        }
    }
    if raw_labels.is_empty() {
        return Err(parse_err(1, "file has a header but no rows".into()));
    }
    let encode = |raw: &[String]| {
        let codes: BTreeMap<&str, usize> = raw
            .iter()
            .map(String::as_str)
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .enumerate()
            .map(|(i, s)| (s, i))
            .collect();
        let names: Vec<String> = codes.keys().map(|s| s.to_string()).collect();
        (raw.iter().map(|s| codes[s.as_str()]).collect::<Vec<_>>(), names)
    };
    let (labels, class_names) = encode(&raw_labels);
    let (groups, group_names) = encode(&raw_groups);
    let n_features = feature_cols.len();
    for j in 0..n_features {
        let first = features[j];
        if features.iter().skip(j).step_by(n_features).all(|&x| x == first) {
            log::warn!("feature `{}` is constant; it will standardize to 0", schema.features[j]);
        }
    }
    Ok(TabularDataset {
        feature_names: schema.features.clone(),
        n_features,
        features,
        labels,
        groups,
        n_classes: class_names.len(),
        n_groups: group_names.len(),
        class_names,
        group_names,
    })
}
