//! Confusion-matrix algebra and group fairness metrics reported globally,
//! per sensitive group and per subgroup.

use crate::metric::Metric;
use crate::tabular::{Dataset, TabularError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use thiserror::Error;

/// Cells with fewer rows than this are reported but flagged.
pub const SMALL_CELL_ROWS: u64 = 30;

pub const DIFFERENCE_CONVENTION: &str =
    "first group minus second group, groups ordered lexicographically by level";

pub const RATIO_CAVEAT: &str =
    "ratio of estimated rates; the estimator of a ratio is not the ratio of estimators";

#[derive(Debug, Error)]
pub enum FairnessError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("label {value} at row {row} is not 0 or 1")]
    InvalidLabel { row: usize, value: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Tabular(#[from] TabularError),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
    pub positive_label: u8,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }

    pub fn add(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tp + other.tp,
            fn_: self.fn_ + other.fn_,
            fp: self.fp + other.fp,
            tn: self.tn + other.tn,
            positive_label: self.positive_label,
        }
    }

    fn record(&mut self, truth: u8, pred: u8) {
        let pos = self.positive_label;
        match (truth == pos, pred == pos) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }
}

fn as_label(values: &[f64]) -> Result<Vec<u8>, FairnessError> {
    values
        .iter()
        .enumerate()
        .map(|(row, &value)| {
            if value == 0.0 {
                Ok(0)
            } else if value == 1.0 {
                Ok(1)
            } else {
                Err(FairnessError::InvalidLabel { row, value })
            }
        })
        .collect()
}

fn check_positive_label(positive_label: u8) -> Result<(), FairnessError> {
    if positive_label > 1 {
        return Err(FairnessError::InvalidArgument(format!(
            "positive_label must be 0 or 1, got {positive_label}"
        )));
    }
    Ok(())
}

pub fn confusion(y_true: &[f64], y_pred: &[f64], positive_label: u8) -> Result<ConfusionMatrix, FairnessError> {
    if y_true.len() != y_pred.len() {
        return Err(FairnessError::Shape(format!(
            "{} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    check_positive_label(positive_label)?;
    let truth = as_label(y_true)?;
    let pred = as_label(y_pred)?;
    let mut cm = ConfusionMatrix {
        positive_label,
        ..Default::default()
    };
    for (t, p) in truth.into_iter().zip(pred) {
        cm.record(t, p);
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: Metric,
    pub acceptance_rate: Metric,
    pub tpr: Metric,
    pub fpr: Metric,
    pub n: u64,
    pub small_cell: bool,
    pub confusion: ConfusionMatrix,
}

impl MetricSet {
    pub const NAMES: [&'static str; 4] = ["accuracy", "acceptance_rate", "tpr", "fpr"];

    pub fn get(&self, name: &str) -> Option<Metric> {
        match name {
            "accuracy" => Some(self.accuracy),
            "acceptance_rate" => Some(self.acceptance_rate),
            "tpr" => Some(self.tpr),
            "fpr" => Some(self.fpr),
            _ => None,
        }
    }

    fn values(&self) -> [Metric; 4] {
        [self.accuracy, self.acceptance_rate, self.tpr, self.fpr]
    }
}

pub fn metric_set(cm: &ConfusionMatrix) -> MetricSet {
    let total = cm.total() as f64;
    MetricSet {
        accuracy: Metric::ratio((cm.tp + cm.tn) as f64, total),
        acceptance_rate: Metric::ratio((cm.tp + cm.fp) as f64, total),
        tpr: Metric::ratio(cm.tp as f64, (cm.tp + cm.fn_) as f64),
        fpr: Metric::ratio(cm.fp as f64, (cm.fp + cm.tn) as f64),
        n: cm.total(),
        small_cell: cm.total() < SMALL_CELL_ROWS,
        confusion: *cm,
    }
}

/// The four metrics side by side, used for differences and variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub accuracy: Metric,
    pub acceptance_rate: Metric,
    pub tpr: Metric,
    pub fpr: Metric,
}

impl MetricValues {
    fn from_array(v: [Metric; 4]) -> Self {
        Self {
            accuracy: v[0],
            acceptance_rate: v[1],
            tpr: v[2],
            fpr: v[3],
        }
    }

    fn entries(&self) -> [(&'static str, Metric); 4] {
        [
            ("accuracy", self.accuracy),
            ("acceptance_rate", self.acceptance_rate),
            ("tpr", self.tpr),
            ("fpr", self.fpr),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDifference {
    pub first: String,
    pub second: String,
    pub gap: MetricValues,
    /// Acceptance rate of `first` divided by that of `second`.
    pub disparate_impact: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetricsReport {
    pub positive_label: u8,
    pub difference_convention: String,
    pub disparate_impact_caveat: String,
    pub global: MetricSet,
    /// column → level → metrics
    pub per_group: BTreeMap<String, BTreeMap<String, MetricSet>>,
    /// `"A=0,B=1"` style key over the full cross product of levels.
    pub per_subgroup: BTreeMap<String, MetricSet>,
    /// column → every ordered pair of levels (first < second).
    pub differences: BTreeMap<String, Vec<GroupDifference>>,
    /// column → population variance of each metric over its groups.
    pub across_group_variance: BTreeMap<String, MetricValues>,
    pub warnings: Vec<String>,
}

/// One `(scope, metric, value)` line of the flat report form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatRecord {
    pub scope: String,
    pub metric: String,
    pub value: Metric,
}

impl GroupMetricsReport {
    pub fn group(&self, column: &str, level: &str) -> Option<&MetricSet> {
        self.per_group.get(column)?.get(level)
    }

    pub fn difference(&self, column: &str) -> Option<&GroupDifference> {
        self.differences.get(column)?.first()
    }

    pub fn flat_records(&self) -> Vec<FlatRecord> {
        let mut out = Vec::new();
        let push_set = |scope: String, set: &MetricSet, out: &mut Vec<FlatRecord>| {
            for (name, value) in MetricSet::NAMES.iter().zip(set.values()) {
                out.push(FlatRecord {
                    scope: scope.clone(),
                    metric: name.to_string(),
                    value,
                });
            }
        };
        push_set("global".into(), &self.global, &mut out);
        for (column, levels) in &self.per_group {
            for (level, set) in levels {
                push_set(format!("group:{column}={level}"), set, &mut out);
            }
        }
        for (key, set) in &self.per_subgroup {
            push_set(format!("subgroup:{key}"), set, &mut out);
        }
        for (column, diffs) in &self.differences {
            for d in diffs {
                let scope = format!("difference:{column}={}-{}", d.first, d.second);
                for (name, value) in d.gap.entries() {
                    out.push(FlatRecord {
                        scope: scope.clone(),
                        metric: name.to_string(),
                        value,
                    });
                }
                out.push(FlatRecord {
                    scope,
                    metric: "disparate_impact".into(),
                    value: d.disparate_impact,
                });
            }
        }
        for (column, var) in &self.across_group_variance {
            for (name, value) in var.entries() {
                out.push(FlatRecord {
                    scope: format!("variance:{column}"),
                    metric: name.to_string(),
                    value,
                });
            }
        }
        out
    }

    pub fn write_flat_csv<W: Write>(&self, writer: W) -> Result<(), FairnessError> {
        write_flat_csv(&self.flat_records(), writer)
    }
}

pub fn write_flat_csv<W: Write>(records: &[FlatRecord], writer: W) -> Result<(), FairnessError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["scope", "metric", "value"])?;
    for r in records {
        wtr.write_record([r.scope.as_str(), r.metric.as_str(), &r.value.to_string()])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn population_variance(values: &[Metric]) -> Metric {
    let defined: Vec<f64> = values.iter().filter_map(|m| m.value()).collect();
    if defined.is_empty() {
        return Metric::Undefined;
    }
    let n = defined.len() as f64;
    let mean = defined.iter().sum::<f64>() / n;
    Metric::Value(defined.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
}

/// Report over explicit group label vectors, one per sensitive column.
pub fn group_report_from_labels(
    y_true: &[f64],
    y_pred: &[f64],
    groups: &[(String, Vec<String>)],
    positive_label: u8,
) -> Result<GroupMetricsReport, FairnessError> {
    let n = y_true.len();
    if y_pred.len() != n {
        return Err(FairnessError::Shape(format!(
            "{n} true labels vs {} predictions",
            y_pred.len()
        )));
    }
    for (name, labels) in groups {
        if labels.len() != n {
            return Err(FairnessError::Shape(format!(
                "group column {name} has {} rows, expected {n}",
                labels.len()
            )));
        }
    }
    check_positive_label(positive_label)?;
    let truth = as_label(y_true)?;
    let pred = as_label(y_pred)?;
    let empty = ConfusionMatrix {
        positive_label,
        ..Default::default()
    };
    let mut warnings = Vec::new();

    let mut global = empty;
    for (t, p) in truth.iter().zip(&pred) {
        global.record(*t, *p);
    }

    let mut per_group = BTreeMap::new();
    let mut differences = BTreeMap::new();
    let mut across_group_variance = BTreeMap::new();
    let mut level_lists: Vec<Vec<String>> = Vec::new();
    for (name, labels) in groups {
        let mut cells: BTreeMap<String, ConfusionMatrix> = BTreeMap::new();
        for ((t, p), g) in truth.iter().zip(&pred).zip(labels) {
            cells.entry(g.clone()).or_insert(empty).record(*t, *p);
        }
        let sets: BTreeMap<String, MetricSet> =
            cells.iter().map(|(k, cm)| (k.clone(), metric_set(cm))).collect();
        for (level, set) in &sets {
            if set.small_cell {
                warnings.push(format!("group {name}={level} has only {} rows", set.n));
            }
        }
        let levels: Vec<&String> = sets.keys().collect();
        let mut diffs = Vec::new();
        for i in 0..levels.len() {
            for j in i + 1..levels.len() {
                let a = &sets[levels[i]];
                let b = &sets[levels[j]];
                let gap = MetricValues::from_array([
                    a.accuracy.minus(b.accuracy),
                    a.acceptance_rate.minus(b.acceptance_rate),
                    a.tpr.minus(b.tpr),
                    a.fpr.minus(b.fpr),
                ]);
                let di = match (a.acceptance_rate.value(), b.acceptance_rate.value()) {
                    (Some(p0), Some(p1)) => disparate_impact(p0, p1),
                    _ => Metric::Undefined,
                };
                diffs.push(GroupDifference {
                    first: levels[i].clone(),
                    second: levels[j].clone(),
                    gap,
                    disparate_impact: di,
                });
            }
        }
        let mut var = [Metric::Undefined; 4];
        for (k, slot) in var.iter_mut().enumerate() {
            let column: Vec<Metric> = sets.values().map(|s| s.values()[k]).collect();
            *slot = population_variance(&column);
        }
        level_lists.push(sets.keys().cloned().collect());
        differences.insert(name.clone(), diffs);
        across_group_variance.insert(name.clone(), MetricValues::from_array(var));
        per_group.insert(name.clone(), sets);
    }

    let mut per_subgroup = BTreeMap::new();
    if groups.len() > 1 {
        let mut cells: BTreeMap<Vec<&str>, ConfusionMatrix> = BTreeMap::new();
        let mut combo = vec![0usize; groups.len()];
        'outer: loop {
            let key: Vec<&str> = combo
                .iter()
                .enumerate()
                .map(|(g, &k)| level_lists[g][k].as_str())
                .collect();
            cells.insert(key, empty);
            for g in (0..combo.len()).rev() {
                combo[g] += 1;
                if combo[g] < level_lists[g].len() {
                    continue 'outer;
                }
                combo[g] = 0;
            }
            break;
        }
        for row in 0..n {
            let key: Vec<&str> = groups.iter().map(|(_, l)| l[row].as_str()).collect();
            if let Some(cm) = cells.get_mut(&key) {
                cm.record(truth[row], pred[row]);
            }
        }
        for (key, cm) in cells {
            let label = groups
                .iter()
                .zip(&key)
                .map(|((name, _), level)| format!("{name}={level}"))
                .collect::<Vec<_>>()
                .join(",");
            let set = metric_set(&cm);
            if set.small_cell {
                warnings.push(format!("subgroup {label} has only {} rows", set.n));
            }
            per_subgroup.insert(label, set);
        }
    }
    for w in &warnings {
        log::debug!("{w}");
    }

    Ok(GroupMetricsReport {
        positive_label,
        difference_convention: DIFFERENCE_CONVENTION.into(),
        disparate_impact_caveat: RATIO_CAVEAT.into(),
        global: metric_set(&global),
        per_group,
        per_subgroup,
        differences,
        across_group_variance,
        warnings,
    })
}

/// Report for the dataset's outcome column against `y_pred`, grouping by
/// each named sensitive column.
pub fn group_report(
    dataset: &Dataset,
    y_pred: &[f64],
    sensitive_columns: &[String],
    positive_label: u8,
) -> Result<GroupMetricsReport, FairnessError> {
    let y_true = dataset.binary_outcome()?;
    let groups = sensitive_columns
        .iter()
        .map(|c| Ok((c.clone(), dataset.labels(c)?)))
        .collect::<Result<Vec<_>, TabularError>>()?;
    group_report_from_labels(&y_true, y_pred, &groups, positive_label)
}

/// Generalization to a positive subset of outcome values: both the truth and
/// the prediction are mapped through `positive_set` and scored with label 1.
pub fn positive_set_metrics(
    y_true: &[f64],
    y_pred: &[f64],
    positive_set: impl Fn(f64) -> bool,
    groups: &[(String, Vec<String>)],
) -> Result<GroupMetricsReport, FairnessError> {
    let map = |v: &[f64]| -> Vec<f64> { v.iter().map(|&x| f64::from(u8::from(positive_set(x)))).collect() };
    group_report_from_labels(&map(y_true), &map(y_pred), groups, 1)
}

/// `p0 / p1`; Undefined when `p1` is zero.
pub fn disparate_impact(p0: f64, p1: f64) -> Metric {
    Metric::ratio(p0, p1)
}

/// Majority count over minority count.
pub fn imbalance_ratio(counts: &[u64]) -> Result<Metric, FairnessError> {
    if counts.len() < 2 {
        return Err(FairnessError::InvalidArgument(
            "imbalance ratio needs at least two classes".into(),
        ));
    }
    let max = *counts.iter().max().unwrap_or(&0);
    let min = *counts.iter().min().unwrap_or(&0);
    Ok(Metric::ratio(max as f64, min as f64))
}
