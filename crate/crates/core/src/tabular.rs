//! Column-oriented dataset model with per-column roles, CSV I/O, and the
//! preprocessing steps used before model fitting.

use crate::numerics::RandomStream;
use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TabularError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("format error at data row {row}: {message}")]
    Format { row: usize, message: String },
    #[error("cannot impute column {0}: every value is missing")]
    CannotImpute(String),
    #[error("column {0} has zero variance")]
    DegenerateVariance(String),
    #[error("column {0} still contains missing values")]
    MissingValues(String),
    #[error("column {0} is not numeric")]
    NotNumeric(String),
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Sensitive,
    Feature,
    Outcome,
    Weight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub role: Role,
    pub kind: Kind,
}

/// JSON map `name -> {role, kind}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schema(pub BTreeMap<String, ColumnSchema>);

impl Schema {
    pub fn from_path(path: &Path) -> Result<Self, TabularError> {
        let text = std::fs::read_to_string(path).map_err(|source| TabularError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| TabularError::Schema(format!("{}: {e}", path.display())))
    }

    pub fn insert(&mut self, name: impl Into<String>, role: Role, kind: Kind) {
        self.0.insert(name.into(), ColumnSchema { role, kind });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> Kind {
        match self {
            ColumnData::Numeric(_) => Kind::Numeric,
            ColumnData::Categorical(_) => Kind::Categorical,
        }
    }

    fn take(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical(v) => {
                ColumnData::Categorical(rows.iter().map(|&r| v[r].clone()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub role: Role,
    pub data: ColumnData,
}

impl Column {
    pub fn numeric(name: impl Into<String>, role: Role, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            role,
            data: ColumnData::Numeric(values.into_iter().map(Some).collect()),
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        role: Role,
        values: impl IntoIterator<Item = Option<S>>,
    ) -> Self {
        Self {
            name: name.into(),
            role,
            data: ColumnData::Categorical(values.into_iter().map(|v| v.map(Into::into)).collect()),
        }
    }

    pub fn kind(&self) -> Kind {
        self.data.kind()
    }
}

/// Renders a numeric cell the way CSV output and group labels do.
pub fn format_number(v: f64) -> String {
    format!("{v}")
}

/// An immutable table of equally long columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    row_count: usize,
}

impl Dataset {
    pub fn new(columns: Vec<Column>) -> Result<Self, TabularError> {
        let row_count = columns.first().map_or(0, |c| c.data.len());
        let mut seen = HashMap::new();
        for c in &columns {
            if c.data.len() != row_count {
                return Err(TabularError::Schema(format!(
                    "column {} has {} rows, expected {row_count}",
                    c.name,
                    c.data.len()
                )));
            }
            if seen.insert(c.name.clone(), ()).is_some() {
                return Err(TabularError::Schema(format!("duplicate column {}", c.name)));
            }
        }
        Ok(Self { columns, row_count })
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn into_columns(self) -> Vec<Column> {
        self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    fn require(&self, name: &str) -> Result<&Column, TabularError> {
        self.column(name)
            .ok_or_else(|| TabularError::UnknownColumn(name.to_string()))
    }

    pub fn names_with_role(&self, role: Role) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| c.role == role)
            .map(|c| c.name.clone())
            .collect()
    }

    /// Fully observed numeric values of a column.
    pub fn numeric_values(&self, name: &str) -> Result<Vec<f64>, TabularError> {
        match &self.require(name)?.data {
            ColumnData::Numeric(v) => v
                .iter()
                .map(|x| x.ok_or_else(|| TabularError::MissingValues(name.to_string())))
                .collect(),
            ColumnData::Categorical(_) => Err(TabularError::NotNumeric(name.to_string())),
        }
    }

    /// Per-row group label: numeric values rendered as text, categorical
    /// values verbatim, missing cells as `"Missing"`.
    pub fn labels(&self, name: &str) -> Result<Vec<String>, TabularError> {
        Ok(match &self.require(name)?.data {
            ColumnData::Numeric(v) => v
                .iter()
                .map(|x| x.map_or_else(|| "Missing".to_string(), format_number))
                .collect(),
            ColumnData::Categorical(v) => v
                .iter()
                .map(|x| x.clone().unwrap_or_else(|| "Missing".to_string()))
                .collect(),
        })
    }

    /// Row-major matrix of the named numeric columns.
    pub fn numeric_matrix(&self, names: &[String]) -> Result<Array2<f64>, TabularError> {
        let cols = names
            .iter()
            .map(|n| self.numeric_values(n))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Array2::from_shape_fn((self.row_count, names.len()), |(r, c)| cols[c][r]))
    }

    pub fn take_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    role: c.role,
                    data: c.data.take(rows),
                })
                .collect(),
            row_count: rows.len(),
        }
    }

    /// Copy with one numeric column's values replaced.
    pub fn with_numeric(&self, name: &str, values: Vec<f64>) -> Result<Dataset, TabularError> {
        if values.len() != self.row_count {
            return Err(TabularError::Schema(format!(
                "replacement for {name} has {} rows, expected {}",
                values.len(),
                self.row_count
            )));
        }
        let mut out = self.clone();
        let col = out
            .columns
            .iter_mut()
            .find(|c| c.name == name)
            .ok_or_else(|| TabularError::UnknownColumn(name.to_string()))?;
        col.data = ColumnData::Numeric(values.into_iter().map(Some).collect());
        Ok(out)
    }

    /// The single outcome column name.
    pub fn outcome_name(&self) -> Result<&str, TabularError> {
        let outcomes: Vec<&Column> = self.columns.iter().filter(|c| c.role == Role::Outcome).collect();
        match outcomes.as_slice() {
            [one] => Ok(one.name.as_str()),
            other => Err(TabularError::Schema(format!(
                "expected exactly one outcome column, found {}",
                other.len()
            ))),
        }
    }

    /// Binary outcome values, checked to lie in {0, 1}.
    pub fn binary_outcome(&self) -> Result<Vec<f64>, TabularError> {
        let name = self.outcome_name()?.to_string();
        let values = self.numeric_values(&name)?;
        if let Some(row) = values.iter().position(|v| *v != 0.0 && *v != 1.0) {
            return Err(TabularError::Format {
                row: row + 1,
                message: format!("outcome {name} must be 0 or 1, got {}", values[row]),
            });
        }
        Ok(values)
    }

    /// Exposure weights if a weight column exists; all in (0, 1].
    pub fn weights(&self) -> Result<Option<Vec<f64>>, TabularError> {
        let names = self.names_with_role(Role::Weight);
        match names.as_slice() {
            [] => Ok(None),
            [name] => {
                let w = self.numeric_values(name)?;
                if let Some(row) = w.iter().position(|v| !(*v > 0.0 && *v <= 1.0)) {
                    return Err(TabularError::Format {
                        row: row + 1,
                        message: format!("weight {name} must lie in (0, 1], got {}", w[row]),
                    });
                }
                Ok(Some(w))
            }
            _ => Err(TabularError::Schema("at most one weight column is allowed".into())),
        }
    }
}

fn is_missing_marker(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "NA"
}

pub fn read_csv(path: &Path, schema: &Schema) -> Result<Dataset, TabularError> {
    let file = File::open(path).map_err(|source| TabularError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv_from(file, schema)
}

/// Parses CSV text. Only columns named in the schema are kept, in header
/// order; unparseable numeric cells become missing.
pub fn read_csv_from<R: Read>(reader: R, schema: &Schema) -> Result<Dataset, TabularError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    for name in schema.0.keys() {
        if !header.contains(name) {
            return Err(TabularError::Schema(format!("declared column {name} is absent")));
        }
    }
    let selected: Vec<(usize, &String, &ColumnSchema)> = header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| schema.0.get(h).map(|s| (i, h, s)))
        .collect();
    let mut data: Vec<ColumnData> = selected
        .iter()
        .map(|(_, _, s)| match s.kind {
            Kind::Numeric => ColumnData::Numeric(Vec::new()),
            Kind::Categorical => ColumnData::Categorical(Vec::new()),
        })
        .collect();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(TabularError::Format {
                row: row + 1,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for ((idx, _, _), col) in selected.iter().zip(data.iter_mut()) {
            let cell = &record[*idx];
            match col {
                ColumnData::Numeric(v) => v.push(if is_missing_marker(cell) {
                    None
                } else {
                    cell.trim().parse::<f64>().ok().filter(|x| x.is_finite())
                }),
                ColumnData::Categorical(v) => v.push(if is_missing_marker(cell) {
                    None
                } else {
                    Some(cell.to_string())
                }),
            }
        }
    }
    let columns = selected
        .into_iter()
        .zip(data)
        .map(|((_, name, s), data)| Column {
            name: name.clone(),
            role: s.role,
            data,
        })
        .collect();
    Dataset::new(columns)
}

pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<(), TabularError> {
    let file = File::create(path).map_err(|source| TabularError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_csv_to(dataset, file)
}

/// Writes the dataset with shortest round-trip float formatting; missing
/// cells are empty.
pub fn write_csv_to<W: Write>(dataset: &Dataset, writer: W) -> Result<(), TabularError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(dataset.columns.iter().map(|c| c.name.as_str()))?;
    let mut record: Vec<String> = Vec::with_capacity(dataset.columns.len());
    for r in 0..dataset.row_count {
        record.clear();
        for c in &dataset.columns {
            record.push(match &c.data {
                ColumnData::Numeric(v) => v[r].map(format_number).unwrap_or_default(),
                ColumnData::Categorical(v) => v[r].clone().unwrap_or_default(),
            });
        }
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|source| TabularError::Io {
        path: "<csv writer>".into(),
        source,
    })?;
    Ok(())
}

/// Schema derived from an in-memory dataset.
pub fn schema_of(dataset: &Dataset) -> Schema {
    Schema(
        dataset
            .columns
            .iter()
            .map(|c| (c.name.clone(), ColumnSchema { role: c.role, kind: c.kind() }))
            .collect(),
    )
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Fills numeric gaps with the column median and categorical gaps with the
/// level `"Missing"`.
pub fn impute(dataset: &Dataset) -> Result<Dataset, TabularError> {
    let mut columns = Vec::with_capacity(dataset.columns.len());
    for c in &dataset.columns {
        let data = match &c.data {
            ColumnData::Numeric(v) => {
                if v.iter().all(Option::is_some) {
                    c.data.clone()
                } else {
                    let mut present: Vec<f64> = v.iter().flatten().copied().collect();
                    let fill = median(&mut present)
                        .ok_or_else(|| TabularError::CannotImpute(c.name.clone()))?;
                    ColumnData::Numeric(v.iter().map(|x| Some(x.unwrap_or(fill))).collect())
                }
            }
            ColumnData::Categorical(v) => ColumnData::Categorical(
                v.iter()
                    .map(|x| Some(x.clone().unwrap_or_else(|| "Missing".to_string())))
                    .collect(),
            ),
        };
        columns.push(Column {
            name: c.name.clone(),
            role: c.role,
            data,
        });
    }
    Dataset::new(columns)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalEncoding {
    pub column: String,
    pub role: Role,
    /// Most frequent level; it gets no dummy.
    pub reference: String,
    /// Levels with a dummy column, in output order.
    pub levels: Vec<String>,
}

impl CategoricalEncoding {
    pub fn dummy_name(&self, level: &str) -> String {
        format!("{}_{}", self.column, level)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EncodingMap {
    pub encodings: Vec<CategoricalEncoding>,
    /// Single-level categorical columns removed from the output.
    pub dropped: Vec<String>,
}

impl EncodingMap {
    /// Applies a fitted encoding to another dataset with the same columns.
    /// Levels unseen at fit time encode as all-zero dummies.
    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset, TabularError> {
        let mut columns = Vec::new();
        for c in &dataset.columns {
            if self.dropped.contains(&c.name) {
                continue;
            }
            match (&c.data, self.encodings.iter().find(|e| e.column == c.name)) {
                (ColumnData::Categorical(values), Some(enc)) => {
                    for level in &enc.levels {
                        let dummy = values
                            .iter()
                            .map(|v| match v {
                                Some(v) => Ok(if v == level { 1.0 } else { 0.0 }),
                                None => Err(TabularError::MissingValues(c.name.clone())),
                            })
                            .collect::<Result<Vec<f64>, _>>()?;
                        columns.push(Column::numeric(enc.dummy_name(level), c.role, dummy));
                    }
                }
                (ColumnData::Categorical(_), None) => {
                    return Err(TabularError::Schema(format!(
                        "categorical column {} has no fitted encoding",
                        c.name
                    )))
                }
                _ => columns.push(c.clone()),
            }
        }
        Dataset::new(columns)
    }
}

/// Replaces each categorical column by k−1 dummy columns. The most frequent
/// level is the reference (ties broken lexicographically); dummies follow in
/// lexicographic level order and inherit the source column's role.
pub fn one_hot(dataset: &Dataset) -> Result<(Dataset, EncodingMap), TabularError> {
    let mut map = EncodingMap::default();
    for c in &dataset.columns {
        if let ColumnData::Categorical(values) = &c.data {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for v in values {
                let v = v
                    .as_deref()
                    .ok_or_else(|| TabularError::MissingValues(c.name.clone()))?;
                *counts.entry(v).or_default() += 1;
            }
            if counts.len() <= 1 {
                log::warn!("categorical column {} has a single level; dropped", c.name);
                map.dropped.push(c.name.clone());
                continue;
            }
            // Ties go to the lexicographically first level.
            let mut reference = "";
            let mut best = 0;
            for (level, &n) in &counts {
                if n > best {
                    best = n;
                    reference = level;
                }
            }
            map.encodings.push(CategoricalEncoding {
                column: c.name.clone(),
                role: c.role,
                reference: reference.to_string(),
                levels: counts
                    .keys()
                    .filter(|l| **l != reference)
                    .map(|l| l.to_string())
                    .collect(),
            });
        }
    }
    let encoded = map.apply(dataset)?;
    Ok((encoded, map))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SdConvention {
    /// Divide by n.
    #[default]
    Population,
    /// Divide by n − 1.
    Unbiased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub convention: SdConvention,
    pub columns: Vec<ColumnScale>,
}

impl Standardization {
    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset, TabularError> {
        let mut out = dataset.clone();
        for s in &self.columns {
            let values = dataset.numeric_values(&s.name)?;
            out = out.with_numeric(&s.name, values.iter().map(|v| (v - s.mean) / s.sd).collect())?;
        }
        Ok(out)
    }
}

/// Standardizes every numeric feature and sensitive column using moments
/// estimated on `fit_rows`. Outcome and weight columns are left as is.
pub fn standardize(
    dataset: &Dataset,
    fit_rows: &[usize],
    convention: SdConvention,
) -> Result<(Dataset, Standardization), TabularError> {
    let names: Vec<String> = dataset
        .columns
        .iter()
        .filter(|c| matches!(c.role, Role::Feature | Role::Sensitive) && c.kind() == Kind::Numeric)
        .map(|c| c.name.clone())
        .collect();
    standardize_columns(dataset, fit_rows, &names, convention)
}

pub fn standardize_columns(
    dataset: &Dataset,
    fit_rows: &[usize],
    names: &[String],
    convention: SdConvention,
) -> Result<(Dataset, Standardization), TabularError> {
    let min_rows = match convention {
        SdConvention::Population => 1,
        SdConvention::Unbiased => 2,
    };
    if fit_rows.len() < min_rows {
        return Err(TabularError::InvalidArgument(format!(
            "standardize needs at least {min_rows} fit rows"
        )));
    }
    let mut scales = Vec::with_capacity(names.len());
    for name in names {
        let values = dataset.numeric_values(name)?;
        let fit: Vec<f64> = fit_rows.iter().map(|&r| values[r]).collect();
        let n = fit.len() as f64;
        let mean = fit.iter().sum::<f64>() / n;
        let ss: f64 = fit.iter().map(|v| (v - mean) * (v - mean)).sum();
        let denom = match convention {
            SdConvention::Population => n,
            SdConvention::Unbiased => n - 1.0,
        };
        let sd = (ss / denom).sqrt();
        if !(sd > 0.0) {
            return Err(TabularError::DegenerateVariance(name.clone()));
        }
        scales.push(ColumnScale {
            name: name.clone(),
            mean,
            sd,
        });
    }
    let fitted = Standardization {
        convention,
        columns: scales,
    };
    Ok((fitted.apply(dataset)?, fitted))
}

/// Random train/test partition of `rows` indices. The train side gets
/// `floor(fraction · rows)` rows, except that a single row always goes to
/// train. Both index lists come back sorted.
pub fn split_indices(
    rows: usize,
    train_fraction: f64,
    stream: RandomStream,
) -> Result<(Vec<usize>, Vec<usize>), TabularError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(TabularError::InvalidArgument(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut train_size = (train_fraction * rows as f64 + 1e-9).floor() as usize;
    if rows == 1 {
        log::warn!("split of a single row: it goes to the training side");
        train_size = 1;
    }
    let mut order: Vec<usize> = (0..rows).collect();
    order.shuffle(&mut stream.rng());
    let mut train = order[..train_size].to_vec();
    let mut test = order[train_size..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(
    dataset: &Dataset,
    train_fraction: f64,
    stream: RandomStream,
) -> Result<(Dataset, Dataset), TabularError> {
    let (train, test) = split_indices(dataset.row_count, train_fraction, stream)?;
    Ok((dataset.take_rows(&train), dataset.take_rows(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn schema(entries: &[(&str, Role, Kind)]) -> Schema {
        let mut s = Schema::default();
        for (n, r, k) in entries {
            s.insert(*n, *r, *k);
        }
        s
    }

    #[test]
    fn header_only_file() {
        let s = schema(&[("x", Role::Feature, Kind::Numeric)]);
        let d = read_csv_from("x\n".as_bytes(), &s).unwrap();
        assert_eq!(d.row_count(), 0);
        assert_eq!(d.columns().len(), 1);
    }

    #[test]
    fn typed_rows_and_missing_markers() {
        let s = schema(&[
            ("x", Role::Feature, Kind::Numeric),
            ("sex", Role::Sensitive, Kind::Categorical),
            ("y", Role::Outcome, Kind::Numeric),
        ]);
        let text = "x,sex,y,ignored\n1.5,F,1,a\nNA,,0,b\nabc,M,1,c\n";
        let d = read_csv_from(text.as_bytes(), &s).unwrap();
        assert_eq!(d.row_count(), 3);
        assert_eq!(d.column("sex").unwrap().kind(), Kind::Categorical);
        assert!(d.column("ignored").is_none());
        assert_eq!(
            d.column("x").unwrap().data,
            ColumnData::Numeric(vec![Some(1.5), None, None])
        );
        assert_eq!(d.labels("sex").unwrap(), vec!["F", "Missing", "M"]);
    }

    #[test]
    fn absent_column_and_ragged_rows() {
        let s = schema(&[("x", Role::Feature, Kind::Numeric), ("z", Role::Feature, Kind::Numeric)]);
        match read_csv_from("x\n1\n".as_bytes(), &s) {
            Err(TabularError::Schema(msg)) => assert!(msg.contains('z')),
            other => panic!("unexpected {other:?}"),
        }
        let s = schema(&[("x", Role::Feature, Kind::Numeric)]);
        match read_csv_from("x,y\n1,2\n3\n".as_bytes(), &s) {
            Err(TabularError::Format { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn impute_rules() {
        let d = Dataset::new(vec![
            Column {
                name: "x".into(),
                role: Role::Feature,
                data: ColumnData::Numeric(vec![Some(1.0), None, Some(3.0)]),
            },
            Column::categorical("c", Role::Feature, vec![Some("a"), None, Some("a")]),
        ])
        .unwrap();
        let out = impute(&d).unwrap();
        assert_eq!(out.numeric_values("x").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(out.labels("c").unwrap(), vec!["a", "Missing", "a"]);

        let empty = Dataset::new(vec![Column {
            name: "x".into(),
            role: Role::Feature,
            data: ColumnData::Numeric(vec![None, None]),
        }])
        .unwrap();
        assert!(matches!(impute(&empty), Err(TabularError::CannotImpute(n)) if n == "x"));
    }

    #[test]
    fn one_hot_reference_is_most_frequent() {
        let d = Dataset::new(vec![
            Column::categorical(
                "Sex",
                Role::Sensitive,
                ["Male", "Female", "Male", "Female", "Male"].map(Some),
            ),
            Column::numeric("b", Role::Feature, vec![0.0, 1.0, 1.0, 0.0, 1.0]),
            Column::categorical("k", Role::Feature, ["c"; 5].map(Some)),
        ])
        .unwrap();
        let (enc, map) = one_hot(&d).unwrap();
        let names: Vec<&str> = enc.columns().iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, vec!["Sex_Female", "b"]);
        assert_eq!(enc.column("Sex_Female").unwrap().role, Role::Sensitive);
        assert_eq!(enc.numeric_values("Sex_Female").unwrap(), vec![0.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!(enc.numeric_values("b").unwrap(), d.numeric_values("b").unwrap());
        assert_eq!(map.dropped, vec!["k".to_string()]);
        assert_eq!(map.encodings[0].reference, "Male");
    }

    #[test]
    fn one_hot_tie_goes_to_lexicographic_first() {
        let d = Dataset::new(vec![Column::categorical(
            "o",
            Role::Feature,
            ["b", "a", "c", "b", "a"].map(Some),
        )])
        .unwrap();
        let (_, map) = one_hot(&d).unwrap();
        assert_eq!(map.encodings[0].reference, "a");
        assert_eq!(map.encodings[0].levels, vec!["b", "c"]);
    }

    #[test]
    fn standardize_conventions() {
        let d = Dataset::new(vec![Column::numeric("x", Role::Feature, vec![1.0, 2.0, 3.0])]).unwrap();
        let rows = [0, 1, 2];
        let (pop, meta) = standardize(&d, &rows, SdConvention::Population).unwrap();
        let v = pop.numeric_values("x").unwrap();
        assert_abs_diff_eq!(v[0], -1.2247, epsilon = 1e-4);
        assert_abs_diff_eq!(v[1], 0.0);
        assert_abs_diff_eq!(v[2], 1.2247, epsilon = 1e-4);
        assert_eq!(meta.convention, SdConvention::Population);

        let (unb, _) = standardize(&d, &rows, SdConvention::Unbiased).unwrap();
        assert_eq!(unb.numeric_values("x").unwrap(), vec![-1.0, 0.0, 1.0]);

        let (again, _) = standardize(&pop, &rows, SdConvention::Population).unwrap();
        for (a, b) in again.numeric_values("x").unwrap().iter().zip(&v) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }

        let flat = Dataset::new(vec![Column::numeric("x", Role::Feature, vec![2.0; 3])]).unwrap();
        assert!(matches!(
            standardize(&flat, &rows, SdConvention::Unbiased),
            Err(TabularError::DegenerateVariance(_))
        ));
    }

    #[test]
    fn standardize_skips_outcome_and_applies_to_held_out_rows() {
        let d = Dataset::new(vec![
            Column::numeric("x", Role::Feature, vec![1.0, 3.0, 5.0, 100.0]),
            Column::numeric("y", Role::Outcome, vec![0.0, 1.0, 1.0, 0.0]),
        ])
        .unwrap();
        let (out, meta) = standardize(&d, &[0, 1, 2], SdConvention::Unbiased).unwrap();
        assert_eq!(meta.columns.len(), 1);
        assert_eq!(out.numeric_values("y").unwrap(), d.numeric_values("y").unwrap());
        assert_abs_diff_eq!(out.numeric_values("x").unwrap()[3], (100.0 - 3.0) / 2.0);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let s = RandomStream::new(9, 0);
        let (a, b) = split_indices(10, 0.8, s).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        assert_eq!(split_indices(10, 0.8, s).unwrap(), (a.clone(), b.clone()));
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(split_indices(1, 0.8, s).unwrap(), (vec![0], vec![]));
        assert!(split_indices(5, 1.0, s).is_err());
    }

    fn dataset_strategy() -> impl Strategy<Value = Dataset> {
        (1usize..20).prop_flat_map(|n| {
            (
                proptest::collection::vec(proptest::option::of(-1e6f64..1e6), n),
                proptest::collection::vec(proptest::option::of("[a-c]{1,2}"), n),
            )
                .prop_map(|(x, c)| {
                    Dataset::new(vec![
                        Column {
                            name: "x".into(),
                            role: Role::Feature,
                            data: ColumnData::Numeric(x),
                        },
                        Column {
                            name: "c".into(),
                            role: Role::Sensitive,
                            data: ColumnData::Categorical(c),
                        },
                    ])
                    .unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn csv_round_trip(d in dataset_strategy()) {
            let mut buf = Vec::new();
            write_csv_to(&d, &mut buf).unwrap();
            let back = read_csv_from(buf.as_slice(), &schema_of(&d)).unwrap();
            prop_assert_eq!(back, d);
        }

        #[test]
        fn impute_keeps_observed_cells(d in dataset_strategy()) {
            prop_assume!(matches!(&d.columns()[0].data, ColumnData::Numeric(v) if v.iter().any(Option::is_some)));
            let out = impute(&d).unwrap();
            for (before, after) in d.columns().iter().zip(out.columns()) {
                match (&before.data, &after.data) {
                    (ColumnData::Numeric(b), ColumnData::Numeric(a)) => {
                        for (x, y) in b.iter().zip(a) {
                            prop_assert!(y.is_some());
                            if x.is_some() { prop_assert_eq!(x, y); }
                        }
                    }
                    (ColumnData::Categorical(b), ColumnData::Categorical(a)) => {
                        for (x, y) in b.iter().zip(a) {
                            prop_assert!(y.is_some());
                            if x.is_some() { prop_assert_eq!(x, y); }
                        }
                    }
                    _ => prop_assert!(false, "kind changed"),
                }
            }
        }

        #[test]
        fn one_hot_decodes_back(levels in proptest::collection::vec("[a-d]", 2..40)) {
            let d = Dataset::new(vec![Column::categorical("g", Role::Feature, levels.iter().map(|s| Some(s.clone())))]).unwrap();
            let (enc, map) = one_hot(&d).unwrap();
            if map.dropped.is_empty() {
                let e = &map.encodings[0];
                let dummies: Vec<Vec<f64>> = e.levels.iter().map(|l| enc.numeric_values(&e.dummy_name(l)).unwrap()).collect();
                for (row, original) in levels.iter().enumerate() {
                    let hot: Vec<usize> = (0..dummies.len()).filter(|&k| dummies[k][row] == 1.0).collect();
                    prop_assert!(hot.len() <= 1);
                    let decoded = hot.first().map_or(e.reference.as_str(), |&k| e.levels[k].as_str());
                    prop_assert_eq!(decoded, original.as_str());
                }
            }
        }
    }
}
