//! End-to-end experiment orchestration behind the command-line tool.

use crate::decorrelate::{apply_transition, fit_transition, TransitionMatrix};
use crate::fairness::{group_report_from_labels, FlatRecord, GroupMetricsReport};
use crate::glm::{calibrate_threshold, classify, fit_weighted_logistic, predict_proba, roc_auc, FittedModel, ThresholdChoice};
use crate::metric::Metric;
use crate::numerics::RandomStream;
use crate::simulate::{sample_dataset, SimulationSpec};
use crate::stats::{replicate_summary, write_summary_csv, SummaryRow};
use crate::survival::{build_pseudo_table, read_survival_csv, write_pseudo_csv, CauseRule, SurvivalColumns};
use crate::tabular::{
    impute, one_hot, read_csv, split_indices, standardize, write_csv, Column, Dataset, Role, Schema, SdConvention,
    TabularError,
};
use crate::{Error, Result};
use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Every feature and sensitive column.
    Baseline,
    /// Features only.
    DropSensitive,
    /// Features decorrelated from the sensitive columns; the sensitive
    /// columns only shape the transition and stay out of the model.
    Decorrelate,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::DropSensitive => "drop_sensitive",
            Variant::Decorrelate => "decorrelate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// Predict 1 when the probability is at least this value.
    Fixed(f64),
    /// Calibrate on training predictions so this fraction is predicted 1.
    TargetRate(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemaSource {
    Inline(Schema),
    Path(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSource {
    pub csv: PathBuf,
    pub schema: SchemaSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

fn default_true() -> bool {
    true
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSource>,
    pub sensitive: Vec<String>,
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<String>,
    pub variants: Vec<Variant>,
    pub threshold: ThresholdRule,
    pub positive_label: u8,
    pub split: SplitConfig,
    #[serde(default = "default_true")]
    pub standardize: bool,
    #[serde(default)]
    pub sd_convention: SdConvention,
    #[serde(default = "default_level")]
    pub level: f64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        match (&self.simulation, &self.data) {
            (Some(_), Some(_)) => return fail("give either simulation or data, not both"),
            (None, None) => return fail("one of simulation or data is required"),
            _ => {}
        }
        if self.variants.is_empty() {
            return fail("variants must not be empty");
        }
        if self.sensitive.is_empty() {
            return fail("at least one sensitive column is required");
        }
        for s in &self.sensitive {
            if *s == self.outcome || Some(s) == self.weight.as_ref() {
                return Err(Error::Config(format!(
                    "column {s} cannot be both sensitive and outcome/weight"
                )));
            }
        }
        if self.positive_label > 1 {
            return fail("positive_label must be 0 or 1");
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return fail("split.train_fraction must lie in (0, 1)");
        }
        match self.threshold {
            ThresholdRule::Fixed(t) if !t.is_finite() => return fail("threshold must be finite"),
            ThresholdRule::TargetRate(r) if !(r > 0.0 && r < 1.0) => {
                return fail("target_rate must lie in (0, 1)")
            }
            _ => {}
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return fail("level must lie in (0, 1)");
        }
        if let Some(spec) = &self.simulation {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn replicate_count(&self) -> usize {
        self.simulation.as_ref().map_or(1, |s| s.replicates)
    }

    /// Replaces the simulation and split seeds.
    pub fn override_seed(&mut self, seed: u64) {
        if let Some(spec) = self.simulation.as_mut() {
            spec.seed = seed;
        }
        self.split.seed = seed;
    }
}

/// Resolves `path` against `base` unless it is absolute.
pub fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn with_file<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(fs::File) -> Result<()>,
{
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f(file)
}

fn load_schema(source: &SchemaSource, base: &Path) -> Result<Schema> {
    match source {
        SchemaSource::Inline(s) => Ok(s.clone()),
        SchemaSource::Path(p) => Ok(Schema::from_path(&resolve(base, p))?),
    }
}

/// Reads a JSON file holding either a bare simulation spec or an
/// experiment config with a `simulation` member.
pub fn load_simulation_spec(path: &Path) -> Result<SimulationSpec> {
    let value: serde_json::Value = read_json(path)?;
    let inner = value.get("simulation").cloned().unwrap_or(value);
    serde_json::from_value(inner).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn spec_hash(spec: &SimulationSpec) -> String {
    let canonical = serde_json::to_string(spec).expect("spec serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationManifest {
    pub seed: u64,
    pub rows: usize,
    pub replicates: usize,
    pub spec_sha256: String,
    pub files: Vec<String>,
    pub spec: SimulationSpec,
}

pub fn replicate_file_name(r: usize) -> String {
    format!("replicate_{r:03}.csv")
}

/// Writes one CSV per replicate plus `manifest.json` into `out_dir`.
pub fn cmd_simulate(spec: &SimulationSpec, out_dir: &Path) -> Result<SimulationManifest> {
    spec.validate()?;
    create_dir(out_dir)?;
    let files: Vec<String> = (0..spec.replicates)
        .into_par_iter()
        .map(|r| -> Result<String> {
            let data = sample_dataset(spec, r)?;
            let name = replicate_file_name(r);
            write_csv(&data, &out_dir.join(&name))?;
            Ok(name)
        })
        .collect::<Result<_>>()?;
    let manifest = SimulationManifest {
        seed: spec.seed,
        rows: spec.rows,
        replicates: spec.replicates,
        spec_sha256: spec_hash(spec),
        files,
        spec: spec.clone(),
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

fn assign_roles(dataset: Dataset, config: &ExperimentConfig) -> Result<Dataset> {
    let mut required: Vec<&String> = config.sensitive.iter().collect();
    required.push(&config.outcome);
    if let Some(w) = &config.weight {
        required.push(w);
    }
    for name in required {
        if dataset.column(name).is_none() {
            return Err(TabularError::Schema(format!("column {name} named in the config is absent")).into());
        }
    }
    let columns = dataset
        .into_columns()
        .into_iter()
        .map(|mut c| {
            c.role = if config.sensitive.contains(&c.name) {
                Role::Sensitive
            } else if c.name == config.outcome {
                Role::Outcome
            } else if Some(&c.name) == config.weight.as_ref() {
                Role::Weight
            } else {
                Role::Feature
            };
            c
        })
        .collect();
    Ok(Dataset::new(columns)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelExport {
    pub variant: Variant,
    pub replicate: usize,
    pub threshold: ThresholdChoice,
    pub test_auc: Metric,
    pub model: FittedModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionExport {
    pub columns: Vec<String>,
    pub transition: TransitionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub replicate: usize,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub completed: usize,
    pub failures: Vec<Failure>,
    pub summary: Vec<SummaryRow>,
}

impl VariantSummary {
    pub fn row(&self, scope: &str, metric: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.scope == scope && r.metric == metric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub replicates: usize,
    pub positive_label: u8,
    pub level: f64,
    pub variants: Vec<VariantSummary>,
}

impl RunSummary {
    pub fn variant(&self, v: Variant) -> Option<&VariantSummary> {
        self.variants.iter().find(|s| s.variant == v)
    }

    pub fn failure_count(&self) -> usize {
        self.variants.iter().map(|v| v.failures.len()).sum()
    }
}

struct Prepared {
    encoded: Dataset,
    labels: Vec<(String, Vec<String>)>,
    y: Vec<f64>,
    w: Vec<f64>,
    train: Vec<usize>,
    test: Vec<usize>,
}

fn prepare(config: &ExperimentConfig, raw: Dataset, replicate: usize) -> Result<Prepared> {
    let data = impute(&assign_roles(raw, config)?)?;
    let labels = config
        .sensitive
        .iter()
        .map(|s| Ok((s.clone(), data.labels(s)?)))
        .collect::<Result<Vec<_>>>()?;
    let (encoded, _) = one_hot(&data)?;
    let (train, test) = split_indices(
        encoded.row_count(),
        config.split.train_fraction,
        RandomStream::new(config.split.seed, replicate as u64),
    )?;
    if test.is_empty() {
        return Err(Error::Config("the split leaves no test rows".into()));
    }
    let encoded = if config.standardize {
        standardize(&encoded, &train, config.sd_convention)?.0
    } else {
        encoded
    };
    let y = encoded.binary_outcome()?;
    let w = encoded
        .weights()?
        .unwrap_or_else(|| vec![1.0; encoded.row_count()]);
    Ok(Prepared {
        encoded,
        labels,
        y,
        w,
        train,
        test,
    })
}

struct VariantOutput {
    records: Vec<FlatRecord>,
}

fn pick<T: Clone>(v: &[T], rows: &[usize]) -> Vec<T> {
    rows.iter().map(|&r| v[r].clone()).collect()
}

fn run_variant(
    config: &ExperimentConfig,
    prepared: &Prepared,
    variant: Variant,
    replicate: usize,
    dir: &Path,
) -> Result<VariantOutput> {
    let enc = &prepared.encoded;
    let candidate_columns: Vec<String> = enc
        .columns()
        .iter()
        .filter(|c| matches!(c.role, Role::Feature | Role::Sensitive))
        .map(|c| c.name.clone())
        .collect();
    let is_sensitive = |n: &String| enc.column(n).is_some_and(|c| c.role == Role::Sensitive);
    let mut x = enc.numeric_matrix(&candidate_columns)?;
    let mut transition = None;
    if variant == Variant::Decorrelate {
        let sensitive_idx: Vec<usize> = candidate_columns
            .iter()
            .enumerate()
            .filter(|(_, n)| is_sensitive(n))
            .map(|(i, _)| i)
            .collect();
        let t = fit_transition(&x.select(Axis(0), &prepared.train), &sensitive_idx)?;
        x = apply_transition(&t, &x)?;
        transition = Some(TransitionExport {
            columns: candidate_columns.clone(),
            transition: t,
        });
    }
    let keep: Vec<usize> = candidate_columns
        .iter()
        .enumerate()
        .filter(|(_, n)| variant == Variant::Baseline || !is_sensitive(n))
        .map(|(i, _)| i)
        .collect();
    let x = x.select(Axis(1), &keep);
    let model_columns: Vec<String> = keep.iter().map(|&i| candidate_columns[i].clone()).collect();
    let x_train = x.select(Axis(0), &prepared.train);
    let x_test = x.select(Axis(0), &prepared.test);
    let model = fit_weighted_logistic(
        &x_train,
        &pick(&prepared.y, &prepared.train),
        &pick(&prepared.w, &prepared.train),
        &model_columns,
    )?;
    if !model.converged {
        log::warn!(
            "replicate {replicate} {}: model did not converge ({})",
            variant.name(),
            model.diagnostics.join("; ")
        );
    }
    let threshold = match config.threshold {
        ThresholdRule::Fixed(t) => ThresholdChoice {
            threshold: t,
            realized_rate: Metric::ratio(
                predict_proba(&model, &x_train)?.iter().filter(|p| **p >= t).count() as f64,
                prepared.train.len() as f64,
            )
            .value()
            .unwrap_or(0.0),
            ties_at_boundary: false,
        },
        ThresholdRule::TargetRate(r) => calibrate_threshold(&predict_proba(&model, &x_train)?, r)?,
    };
    let probs = predict_proba(&model, &x_test)?;
    let pred = classify(&probs, threshold.threshold);
    let y_test = pick(&prepared.y, &prepared.test);
    let groups: Vec<(String, Vec<String>)> = prepared
        .labels
        .iter()
        .map(|(n, l)| (n.clone(), pick(l, &prepared.test)))
        .collect();
    let report: GroupMetricsReport = group_report_from_labels(&y_test, &pred, &groups, config.positive_label)?;
    let auc = roc_auc(&y_test, &probs)?;

    create_dir(dir)?;
    write_json(
        &dir.join("model.json"),
        &ModelExport {
            variant,
            replicate,
            threshold,
            test_auc: auc,
            model,
        },
    )?;
    if let Some(t) = transition {
        write_json(&dir.join("transition.json"), &t)?;
    }
    write_json(&dir.join("report.json"), &report)?;
    with_file(&dir.join("report.csv"), |f| Ok(report.write_flat_csv(f)?))?;
    with_file(&dir.join("predictions.csv"), |f| {
        let mut wtr = csv::Writer::from_writer(f);
        let mut header = vec!["row".to_string(), "y".into(), "probability".into(), "prediction".into()];
        header.extend(groups.iter().map(|(n, _)| n.clone()));
        wtr.write_record(&header).map_err(TabularError::from)?;
        for (k, &row) in prepared.test.iter().enumerate() {
            let mut rec = vec![
                row.to_string(),
                y_test[k].to_string(),
                probs[k].to_string(),
                pred[k].to_string(),
            ];
            rec.extend(groups.iter().map(|(_, l)| l[k].clone()));
            wtr.write_record(&rec).map_err(TabularError::from)?;
        }
        wtr.flush().map_err(|e| Error::io(&dir.join("predictions.csv"), e))
    })?;

    let mut records = report.flat_records();
    records.push(FlatRecord {
        scope: "model".into(),
        metric: "auc".into(),
        value: auc,
    });
    records.push(FlatRecord {
        scope: "model".into(),
        metric: "threshold".into(),
        value: Metric::Value(threshold.threshold),
    });
    Ok(VariantOutput { records })
}

type ReplicateResult = Vec<(Variant, std::result::Result<Vec<FlatRecord>, Failure>)>;

fn run_replicate(config: &ExperimentConfig, base: &Path, out_dir: &Path, replicate: usize) -> ReplicateResult {
    let failure = |e: &Error| Failure {
        replicate,
        message: e.to_string(),
        exit_code: e.exit_code(),
    };
    let raw = match (&config.simulation, &config.data) {
        (Some(spec), _) => sample_dataset(spec, replicate).map_err(Error::from),
        (None, Some(d)) => load_schema(&d.schema, base).and_then(|s| Ok(read_csv(&resolve(base, &d.csv), &s)?)),
        (None, None) => Err(Error::Config("no data source".into())),
    };
    let prepared = raw.and_then(|raw| prepare(config, raw, replicate));
    let rep_dir = out_dir.join(format!("replicate_{replicate:03}"));
    config
        .variants
        .iter()
        .map(|&v| {
            let res = match &prepared {
                Ok(p) => run_variant(config, p, v, replicate, &rep_dir.join(v.name()))
                    .map(|o| o.records)
                    .map_err(|e| failure(&e)),
                Err(e) => Err(failure(e)),
            };
            if let Err(f) = &res {
                log::error!("replicate {replicate} {}: {}", v.name(), f.message);
            }
            (v, res)
        })
        .collect()
}

/// Runs every variant on every replicate, writes per-replicate artifacts
/// under the output directory and a replicate summary per variant.
/// Relative paths in the config are resolved against `base`.
pub fn cmd_run(config: &ExperimentConfig, base: &Path) -> Result<RunSummary> {
    config.validate()?;
    let out_dir = resolve(base, &config.output_dir);
    create_dir(&out_dir)?;
    if let Some(d) = &config.data {
        let schema = load_schema(&d.schema, base)?;
        for name in config.sensitive.iter().chain([&config.outcome]).chain(config.weight.iter()) {
            if !schema.0.contains_key(name) {
                return Err(TabularError::Schema(format!("column {name} is not in the schema")).into());
            }
        }
    }
    if let Some(spec) = &config.simulation {
        let names = spec.column_names();
        for name in config.sensitive.iter().chain([&config.outcome]).chain(config.weight.iter()) {
            if !names.contains(name) {
                return Err(TabularError::Schema(format!("column {name} is not simulated")).into());
            }
        }
    }

    let replicates = config.replicate_count();
    let results: Vec<ReplicateResult> = (0..replicates)
        .into_par_iter()
        .map(|r| run_replicate(config, base, &out_dir, r))
        .collect();

    let mut variants = Vec::new();
    for (k, &variant) in config.variants.iter().enumerate() {
        let mut ok = Vec::new();
        let mut failures = Vec::new();
        for rep in &results {
            match &rep[k].1 {
                Ok(records) => ok.push(records.clone()),
                Err(f) => failures.push(f.clone()),
            }
        }
        let summary = if ok.is_empty() {
            Vec::new()
        } else {
            replicate_summary(&ok, config.level)?
        };
        with_file(&out_dir.join(format!("summary_{}.csv", variant.name())), |f| {
            Ok(write_summary_csv(&summary, f)?)
        })?;
        variants.push(VariantSummary {
            variant,
            completed: ok.len(),
            failures,
            summary,
        });
    }
    let summary = RunSummary {
        replicates,
        positive_label: config.positive_label,
        level: config.level,
        variants,
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoConfig {
    pub input: PathBuf,
    pub columns: SurvivalColumns,
    #[serde(default)]
    pub cause_rule: CauseRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exposure_decimals: Option<usize>,
    pub output: PathBuf,
}

/// Expands a raw survival CSV into the per-year pseudo table.
pub fn cmd_pseudo(config: &PseudoConfig, base: &Path) -> Result<usize> {
    let records = read_survival_csv(&resolve(base, &config.input), &config.columns)?;
    let rows = build_pseudo_table(&records, config.cause_rule)?;
    let out = resolve(base, &config.output);
    if let Some(parent) = out.parent() {
        create_dir(parent)?;
    }
    with_file(&out, |f| {
        Ok(write_pseudo_csv(&rows, &config.columns.covariates, f, config.exposure_decimals)?)
    })?;
    Ok(rows.len())
}

fn default_truth() -> String {
    "y".into()
}

fn default_prediction() -> String {
    "prediction".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub predictions: PathBuf,
    #[serde(default = "default_truth")]
    pub truth: String,
    #[serde(default = "default_prediction")]
    pub prediction: String,
    pub sensitive: Vec<String>,
    pub positive_label: u8,
    pub output_dir: PathBuf,
}

/// Fairness report for an existing predictions CSV.
pub fn cmd_metrics(config: &MetricsConfig, base: &Path) -> Result<GroupMetricsReport> {
    let mut schema = Schema::default();
    schema.insert(config.truth.clone(), Role::Outcome, crate::tabular::Kind::Numeric);
    schema.insert(config.prediction.clone(), Role::Feature, crate::tabular::Kind::Numeric);
    for s in &config.sensitive {
        schema.insert(s.clone(), Role::Sensitive, crate::tabular::Kind::Categorical);
    }
    let data = read_csv(&resolve(base, &config.predictions), &schema)?;
    let y = data.numeric_values(&config.truth)?;
    let pred = data.numeric_values(&config.prediction)?;
    let groups = config
        .sensitive
        .iter()
        .map(|s| Ok((s.clone(), data.labels(s)?)))
        .collect::<Result<Vec<_>>>()?;
    let report = group_report_from_labels(&y, &pred, &groups, config.positive_label)?;
    let out = resolve(base, &config.output_dir);
    create_dir(&out)?;
    write_json(&out.join("report.json"), &report)?;
    with_file(&out.join("report.csv"), |f| Ok(report.write_flat_csv(f)?))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecorrelateConfig {
    pub data: DataSource,
    pub sensitive: Vec<String>,
    pub output_dir: PathBuf,
}

/// Fits the transition on every row of the data and writes the transformed
/// CSV together with the transition JSON.
pub fn cmd_decorrelate(config: &DecorrelateConfig, base: &Path) -> Result<TransitionExport> {
    let schema = load_schema(&config.data.schema, base)?;
    let raw = read_csv(&resolve(base, &config.data.csv), &schema)?;
    for s in &config.sensitive {
        if raw.column(s).is_none() {
            return Err(TabularError::Schema(format!("sensitive column {s} is absent")).into());
        }
    }
    let columns = raw
        .into_columns()
        .into_iter()
        .map(|mut c| {
            if config.sensitive.contains(&c.name) {
                c.role = Role::Sensitive;
            } else if c.role == Role::Sensitive {
                c.role = Role::Feature;
            }
            c
        })
        .collect();
    let (encoded, _) = one_hot(&impute(&Dataset::new(columns)?)?)?;
    let names: Vec<String> = encoded
        .columns()
        .iter()
        .filter(|c| matches!(c.role, Role::Feature | Role::Sensitive))
        .map(|c| c.name.clone())
        .collect();
    let sensitive_idx: Vec<usize> = names
        .iter()
        .enumerate()
        .filter(|(_, n)| encoded.column(n).is_some_and(|c| c.role == Role::Sensitive))
        .map(|(i, _)| i)
        .collect();
    let x: Array2<f64> = encoded.numeric_matrix(&names)?;
    let t = fit_transition(&x, &sensitive_idx)?;
    let transformed = apply_transition(&t, &x)?;
    let mut out_cols: Vec<Column> = Vec::new();
    for c in encoded.columns() {
        match names.iter().position(|n| *n == c.name) {
            Some(k) => out_cols.push(Column::numeric(c.name.clone(), c.role, transformed.column(k).to_vec())),
            None => out_cols.push(c.clone()),
        }
    }
    let out = resolve(base, &config.output_dir);
    create_dir(&out)?;
    write_csv(&Dataset::new(out_cols)?, &out.join("transformed.csv"))?;
    let export = TransitionExport {
        columns: names,
        transition: t,
    };
    write_json(&out.join("transition.json"), &export)?;
    Ok(export)
}

/// The reference fairness experiment on simulated data.
pub fn reference_experiment_config() -> ExperimentConfig {
    ExperimentConfig {
        simulation: Some(crate::simulate::reference_experiment_spec()),
        data: None,
        sensitive: vec!["A".into(), "B".into()],
        outcome: "Y".into(),
        weight: None,
        variants: vec![Variant::Baseline, Variant::DropSensitive, Variant::Decorrelate],
        threshold: ThresholdRule::Fixed(0.5),
        positive_label: 0,
        split: SplitConfig {
            train_fraction: 0.8,
            seed: 7,
        },
        standardize: true,
        sd_convention: SdConvention::Population,
        level: 0.95,
        output_dir: PathBuf::from("out/reference"),
    }
}
