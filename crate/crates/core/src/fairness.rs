//! Group-fairness metrics over per-(group, class) confusion counts.
//!
//! Ratio metrics take the minimum over classes and ordered group pairs, so
//! they lie in `[0, 1]` with 1 meaning parity. Gap metrics take the largest
//! absolute rate difference, with 0 meaning parity.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Counts `count[group][true_class][predicted_class]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupedConfusion {
    groups: Vec<String>,
    classes: Vec<String>,
    counts: Vec<u64>,
}

impl GroupedConfusion {
    /// Empty table; needs at least two distinct groups and classes.
    pub fn new(groups: Vec<String>, classes: Vec<String>) -> Result<Self> {
        for (what, labels) in [("groups", &groups), ("classes", &classes)] {
            if labels.len() < 2 {
                return Err(Error::InvalidInput(format!("need at least 2 {what}, got {}", labels.len())));
            }
            if labels.iter().collect::<BTreeSet<_>>().len() != labels.len() {
                return Err(Error::InvalidInput(format!("duplicate {what} labels")));
            }
        }
        let n = groups.len() * classes.len() * classes.len();
        Ok(Self {
            groups,
            classes,
            counts: vec![0; n],
        })
    }

    /// Table with integer labels `0..groups` and `0..classes`.
    pub fn with_sizes(groups: usize, classes: usize) -> Result<Self> {
        Self::new(
            (0..groups).map(|g| g.to_string()).collect(),
            (0..classes).map(|c| c.to_string()).collect(),
        )
    }

    /// Builds a table from nested counts `counts[g][t][p]`.
    pub fn from_nested(groups: Vec<String>, classes: Vec<String>, counts: &[Vec<Vec<u64>>]) -> Result<Self> {
        let mut table = Self::new(groups, classes)?;
        let (g_n, c_n) = (table.groups.len(), table.classes.len());
        if counts.len() != g_n || counts.iter().any(|t| t.len() != c_n || t.iter().any(|r| r.len() != c_n)) {
            return Err(Error::InvalidInput(format!("counts must have shape {g_n}×{c_n}×{c_n}")));
        }
        for (g, by_true) in counts.iter().enumerate() {
            for (t, row) in by_true.iter().enumerate() {
                for (p, &n) in row.iter().enumerate() {
                    table.add(g, t, p, n);
                }
            }
        }
        Ok(table)
    }

    /// Table over labels seen in `(group, true_class, predicted_class, count)`
    /// records, sorted.
    pub fn from_records<'a, I>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str, &'a str, u64)> + Clone,
    {
        let mut groups = BTreeSet::new();
        let mut classes = BTreeSet::new();
        for (g, t, p, _) in records.clone() {
            groups.insert(g.to_string());
            classes.insert(t.to_string());
            classes.insert(p.to_string());
        }
        let mut table = Self::new(groups.into_iter().collect(), classes.into_iter().collect())?;
        for (g, t, p, n) in records {
            table.record(g, t, p, n)?;
        }
        Ok(table)
    }

    fn index(&self, g: usize, t: usize, p: usize) -> usize {
        let c = self.classes.len();
        (g * c + t) * c + p
    }

    pub fn add(&mut self, group: usize, true_class: usize, predicted: usize, n: u64) {
        let i = self.index(group, true_class, predicted);
        self.counts[i] += n;
    }

    /// Adds `n` samples by label.
    pub fn record(&mut self, group: &str, true_class: &str, predicted: &str, n: u64) -> Result<()> {
        let find = |labels: &[String], l: &str, what: &str| {
            labels
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| Error::InvalidInput(format!("unknown {what} `{l}`")))
        };
        let g = find(&self.groups, group, "group")?;
        let t = find(&self.classes, true_class, "class")?;
        let p = find(&self.classes, predicted, "class")?;
        self.add(g, t, p, n);
        Ok(())
    }

    pub fn count(&self, group: usize, true_class: usize, predicted: usize) -> u64 {
        self.counts[self.index(group, true_class, predicted)]
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn group_total(&self, g: usize) -> u64 {
        let c = self.classes.len();
        self.counts[g * c * c..(g + 1) * c * c].iter().sum()
    }

    /// Every count multiplied by `k`.
    pub fn scaled(&self, k: u64) -> Self {
        let mut out = self.clone();
        out.counts.iter_mut().for_each(|n| *n *= k);
        out
    }
}

/// How a rate without any conditioning samples enters a metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MissingClassPolicy {
    /// Leave the comparison (or the summand) out.
    #[default]
    Exclude,
    /// Treat the rate as 0.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct FairnessOptions {
    /// Add-α smoothing: each rate becomes `(hits + α) / (trials + 2α)`.
    pub smoothing: f64,
    pub missing_class: MissingClassPolicy,
}

/// The class and ordered group pair attaining a metric's extremum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// `None` for metrics that sum over classes.
    pub class: Option<String>,
    pub group_a: String,
    pub group_b: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub f_eod: f64,
    pub f_eop: f64,
    pub f_dpa: f64,
    pub gap_eop: f64,
    pub gap_eod: f64,
    pub gap_dpa: f64,
    pub eod_witness: Option<Witness>,
    pub eop_witness: Option<Witness>,
    pub dpa_witness: Option<Witness>,
}

struct Rates {
    /// `[g][c]`: `P(ŷ = c | y = c, z = g)`.
    tpr: Vec<Vec<Option<f64>>>,
    /// `[g][c]`: `P(ŷ = c | y ≠ c, z = g)`.
    fpr: Vec<Vec<Option<f64>>>,
    /// `[g][c]`: `P(ŷ = c | z = g)`.
    pr: Vec<Vec<Option<f64>>>,
}

fn rate(hits: u64, trials: u64, alpha: f64) -> Option<f64> {
    let den = trials as f64 + 2.0 * alpha;
    (den > 0.0).then(|| (hits as f64 + alpha) / den)
}

fn rates(table: &GroupedConfusion, opts: &FairnessOptions) -> Result<Rates> {
    if !(opts.smoothing >= 0.0 && opts.smoothing.is_finite()) {
        return Err(Error::param("smoothing", "must be a non-negative number"));
    }
    if table.total() == 0 {
        return Err(Error::InvalidInput("confusion table is empty".into()));
    }
    let (g_n, c_n) = (table.groups.len(), table.classes.len());
    let a = opts.smoothing;
    let mut out = Rates {
        tpr: vec![vec![None; c_n]; g_n],
        fpr: vec![vec![None; c_n]; g_n],
        pr: vec![vec![None; c_n]; g_n],
    };
    for g in 0..g_n {
        let n_true: Vec<u64> = (0..c_n).map(|t| (0..c_n).map(|p| table.count(g, t, p)).sum()).collect();
        let n_pred: Vec<u64> = (0..c_n).map(|p| (0..c_n).map(|t| table.count(g, t, p)).sum()).collect();
        let n_group: u64 = n_true.iter().sum();
        for c in 0..c_n {
            let hits = table.count(g, c, c);
            out.tpr[g][c] = rate(hits, n_true[c], a);
            out.fpr[g][c] = rate(n_pred[c] - hits, n_group - n_true[c], a);
            out.pr[g][c] = rate(n_pred[c], n_group, a);
        }
    }
    Ok(out)
}

/// `min` over both orderings of a pair: `min(a/b, b/a)` with `0/0 = 1`.
fn pair_ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a.min(b) / a.max(b)
    }
}

fn resolve(x: Option<f64>, policy: MissingClassPolicy) -> Option<f64> {
    match policy {
        MissingClassPolicy::Exclude => x,
        MissingClassPolicy::Zero => Some(x.unwrap_or(0.0)),
    }
}

/// Tracks the extremum of a scan together with its witness.
struct Extremum<'a> {
    table: &'a GroupedConfusion,
    best: Option<(f64, Option<usize>, usize, usize)>,
    minimize: bool,
}

impl<'a> Extremum<'a> {
    fn new(table: &'a GroupedConfusion, minimize: bool) -> Self {
        Self {
            table,
            best: None,
            minimize,
        }
    }

    /// `a` is the group with the smaller rate.
    fn offer(&mut self, value: f64, class: Option<usize>, a: usize, b: usize) {
        let better = match self.best {
            None => true,
            Some((v, ..)) => {
                if self.minimize {
                    value < v
                } else {
                    value > v
                }
            }
        };
        if better {
            self.best = Some((value, class, a, b));
        }
    }

    /// Value (the neutral `empty` when nothing was compared) and witness.
    fn finish(self, empty: f64) -> (f64, Option<Witness>) {
        match self.best {
            None => (empty, None),
            Some((value, class, a, b)) => {
                let w = Witness {
                    class: class.map(|c| self.table.classes[c].clone()),
                    group_a: self.table.groups[a].clone(),
                    group_b: self.table.groups[b].clone(),
                    value,
                };
                (value, Some(w))
            }
        }
    }
}

fn group_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |a| (a + 1..n).map(move |b| (a, b)))
}

/// Equalized-odds ratio with its witness.
fn eod(table: &GroupedConfusion, r: &Rates, policy: MissingClassPolicy) -> (f64, Option<Witness>) {
    let mut ext = Extremum::new(table, true);
    for c in 0..table.classes.len() {
        for (a, b) in group_pairs(table.groups.len()) {
            for rates in [&r.tpr, &r.fpr] {
                if let (Some(x), Some(y)) = (resolve(rates[a][c], policy), resolve(rates[b][c], policy)) {
                    let (lo, hi) = if x <= y { (a, b) } else { (b, a) };
                    ext.offer(pair_ratio(x, y), Some(c), lo, hi);
                }
            }
        }
    }
    ext.finish(1.0)
}

fn tpr_sums(table: &GroupedConfusion, r: &Rates, policy: MissingClassPolicy, a: usize, b: usize) -> (f64, f64) {
    let mut sums = (0.0, 0.0);
    for c in 0..table.classes.len() {
        match policy {
            MissingClassPolicy::Exclude => {
                if let (Some(x), Some(y)) = (r.tpr[a][c], r.tpr[b][c]) {
                    sums.0 += x;
                    sums.1 += y;
                }
            }
            MissingClassPolicy::Zero => {
                sums.0 += r.tpr[a][c].unwrap_or(0.0);
                sums.1 += r.tpr[b][c].unwrap_or(0.0);
            }
        }
    }
    sums
}

fn eop(table: &GroupedConfusion, r: &Rates, policy: MissingClassPolicy) -> (f64, Option<Witness>) {
    let mut ext = Extremum::new(table, true);
    for (a, b) in group_pairs(table.groups.len()) {
        let (x, y) = tpr_sums(table, r, policy, a, b);
        let (lo, hi) = if x <= y { (a, b) } else { (b, a) };
        ext.offer(pair_ratio(x, y), None, lo, hi);
    }
    ext.finish(1.0)
}

fn dpa(table: &GroupedConfusion, r: &Rates) -> (f64, Option<Witness>) {
    let mut ext = Extremum::new(table, true);
    for c in 0..table.classes.len() {
        for (a, b) in group_pairs(table.groups.len()) {
            if let (Some(x), Some(y)) = (r.pr[a][c], r.pr[b][c]) {
                let (lo, hi) = if x <= y { (a, b) } else { (b, a) };
                ext.offer(pair_ratio(x, y), Some(c), lo, hi);
            }
        }
    }
    ext.finish(1.0)
}

fn max_gap(table: &GroupedConfusion, sets: &[&Vec<Vec<Option<f64>>>], policy: MissingClassPolicy) -> f64 {
    let mut worst: f64 = 0.0;
    for c in 0..table.classes.len() {
        for (a, b) in group_pairs(table.groups.len()) {
            for rates in sets {
                if let (Some(x), Some(y)) = (resolve(rates[a][c], policy), resolve(rates[b][c], policy)) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
    }
    worst
}

fn check_groups_nonempty(table: &GroupedConfusion) -> Result<()> {
    match (0..table.groups.len()).find(|&g| table.group_total(g) == 0) {
        Some(g) => Err(Error::InvalidInput(format!("group `{}` has no samples", table.groups[g]))),
        None => Ok(()),
    }
}

pub fn f_eod(table: &GroupedConfusion) -> Result<f64> {
    let opts = FairnessOptions::default();
    Ok(eod(table, &rates(table, &opts)?, opts.missing_class).0)
}

pub fn f_eop(table: &GroupedConfusion) -> Result<f64> {
    let opts = FairnessOptions::default();
    Ok(eop(table, &rates(table, &opts)?, opts.missing_class).0)
}

pub fn f_dpa(table: &GroupedConfusion) -> Result<f64> {
    let r = rates(table, &FairnessOptions::default())?;
    check_groups_nonempty(table)?;
    Ok(dpa(table, &r).0)
}

/// `(gap_eop, gap_eod, gap_dpa)`.
pub fn gap_metrics(table: &GroupedConfusion) -> Result<(f64, f64, f64)> {
    let r = evaluate(table, &FairnessOptions::default())?;
    Ok((r.gap_eop, r.gap_eod, r.gap_dpa))
}

/// All six metrics with witnesses.
pub fn evaluate(table: &GroupedConfusion, opts: &FairnessOptions) -> Result<FairnessReport> {
    let r = rates(table, opts)?;
    check_groups_nonempty(table)?;
    let policy = opts.missing_class;
    let (f_eod, eod_witness) = eod(table, &r, policy);
    let (f_eop, eop_witness) = eop(table, &r, policy);
    let (f_dpa, dpa_witness) = dpa(table, &r);
    Ok(FairnessReport {
        f_eod,
        f_eop,
        f_dpa,
        gap_eop: max_gap(table, &[&r.tpr], policy),
        gap_eod: max_gap(table, &[&r.tpr, &r.fpr], policy),
        gap_dpa: max_gap(table, &[&r.pr], MissingClassPolicy::Exclude),
        eod_witness,
        eop_witness,
        dpa_witness,
    })
}

/// Builds a table from parallel integer label slices.
pub fn confusion_from_predictions(
    groups: &[usize],
    truth: &[usize],
    predicted: &[usize],
    group_count: usize,
    class_count: usize,
) -> Result<GroupedConfusion> {
    if groups.len() != truth.len() || truth.len() != predicted.len() {
        return Err(Error::InvalidInput("prediction columns differ in length".into()));
    }
    let mut table = GroupedConfusion::with_sizes(group_count, class_count)?;
    for ((&g, &t), &p) in groups.iter().zip(truth).zip(predicted) {
        if g >= group_count || t >= class_count || p >= class_count {
            return Err(Error::InvalidInput(format!("label out of range: ({g}, {t}, {p})")));
        }
        table.add(g, t, p, 1);
    }
    Ok(table)
}

/// Multi-label predictions: one binary table per label, reduced by the same
/// min (ratios) and max (gaps) across labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLabelConfusion {
    pub labels: Vec<String>,
    pub tables: Vec<GroupedConfusion>,
}

impl MultiLabelConfusion {
    /// `truth[i][l]` and `predicted[i][l]` flag label `l` on sample `i`.
    pub fn from_predictions(
        labels: Vec<String>,
        groups: &[usize],
        group_count: usize,
        truth: &[Vec<bool>],
        predicted: &[Vec<bool>],
    ) -> Result<Self> {
        if groups.len() != truth.len() || truth.len() != predicted.len() {
            return Err(Error::InvalidInput("prediction columns differ in length".into()));
        }
        if truth.iter().chain(predicted).any(|row| row.len() != labels.len()) {
            return Err(Error::InvalidInput(format!("every row needs {} label flags", labels.len())));
        }
        let mut tables = Vec::with_capacity(labels.len());
        for l in 0..labels.len() {
            let t: Vec<usize> = truth.iter().map(|r| usize::from(r[l])).collect();
            let p: Vec<usize> = predicted.iter().map(|r| usize::from(r[l])).collect();
            tables.push(confusion_from_predictions(groups, &t, &p, group_count, 2)?);
        }
        Ok(Self { labels, tables })
    }

    pub fn evaluate(&self, opts: &FairnessOptions) -> Result<FairnessReport> {
        let mut out: Option<FairnessReport> = None;
        for (label, table) in self.labels.iter().zip(&self.tables) {
            let mut r = evaluate(table, opts)?;
            for w in [&mut r.eod_witness, &mut r.eop_witness, &mut r.dpa_witness].into_iter().flatten() {
                w.class = Some(match &w.class {
                    Some(c) => format!("{label}:{c}"),
                    None => label.clone(),
                });
            }
            out = Some(match out {
                None => r,
                Some(acc) => fold_reports(acc, r),
            });
        }
        out.ok_or_else(|| Error::InvalidInput("no labels".into()))
    }
}

fn fold_reports(a: FairnessReport, b: FairnessReport) -> FairnessReport {
    let pick = |x: f64, wx: Option<Witness>, y: f64, wy: Option<Witness>| {
        if y < x {
            (y, wy)
        } else {
            (x, wx)
        }
    };
    let (f_eod, eod_witness) = pick(a.f_eod, a.eod_witness, b.f_eod, b.eod_witness);
    let (f_eop, eop_witness) = pick(a.f_eop, a.eop_witness, b.f_eop, b.eop_witness);
    let (f_dpa, dpa_witness) = pick(a.f_dpa, a.dpa_witness, b.f_dpa, b.dpa_witness);
    FairnessReport {
        f_eod,
        f_eop,
        f_dpa,
        gap_eop: a.gap_eop.max(b.gap_eop),
        gap_eod: a.gap_eod.max(b.gap_eod),
        gap_dpa: a.gap_dpa.max(b.gap_dpa),
        eod_witness,
        eop_witness,
        dpa_witness,
    }
}

#[derive(Debug, Deserialize)]
struct LogRow {
    group: String,
    true_class: String,
    predicted_class: String,
    #[serde(default)]
    count: Option<u64>,
}

fn read_rows(path: &Path, need_count: bool) -> Result<Vec<LogRow>> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                _ => unreachable!(),
            },
            _ => Error::Csv(e),
        })?;
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<LogRow>().enumerate() {
        // header is line 1
        let line = i as u64 + 2;
        let row = rec.map_err(|e| Error::Parse {
            path: display.clone(),
            line,
            message: e.to_string(),
        })?;
        if need_count && row.count.is_none() {
            return Err(Error::Parse {
                path: display,
                line,
                message: "missing `count`".into(),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

fn table_from_rows(rows: &[LogRow]) -> Result<GroupedConfusion> {
    GroupedConfusion::from_records(
        rows.iter()
            .map(|r| (r.group.as_str(), r.true_class.as_str(), r.predicted_class.as_str(), r.count.unwrap_or(1))),
    )
}

/// Prediction log with header `group,true_class,predicted_class`; one row
/// per sample.
pub fn load_prediction_log(path: impl AsRef<Path>) -> Result<GroupedConfusion> {
    let rows = read_rows(path.as_ref(), false)?;
    if rows.iter().any(|r| r.count.is_some()) {
        return Err(Error::InvalidInput("prediction log must not carry a `count` column".into()));
    }
    table_from_rows(&rows)
}

/// Aggregated table with header `group,true_class,predicted_class,count`.
pub fn load_count_table(path: impl AsRef<Path>) -> Result<GroupedConfusion> {
    table_from_rows(&read_rows(path.as_ref(), true)?)
}

/// `(group, class) -> [tpr, fpr, positive rate]`.
pub type RateTable = BTreeMap<(String, String), [Option<f64>; 3]>;

/// Aggregates a per-(group, class) summary, handy for printing.
pub fn rate_table(table: &GroupedConfusion, opts: &FairnessOptions) -> Result<RateTable> {
    let r = rates(table, opts)?;
    let mut out = BTreeMap::new();
    for (g, gl) in table.groups.iter().enumerate() {
        for (c, cl) in table.classes.iter().enumerate() {
            out.insert((gl.clone(), cl.clone()), [r.tpr[g][c], r.fpr[g][c], r.pr[g][c]]);
        }
    }
    Ok(out)
}
