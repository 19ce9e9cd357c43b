//! Survival-data preprocessing: interval exposures, Balducci mortality
//! rates, five-year rates and the per-year pseudo table.

use crate::metric::Metric;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SurvivalError {
    #[error("record {id}: {message}")]
    InvalidRecord { id: String, message: String },
    #[error("internal consistency: {0}")]
    InternalConsistency(String),
    #[error("exposure {0} is not positive")]
    DegenerateExposure(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("format error at data row {row}: {message}")]
    Format { row: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metastatic {
    M0,
    M1,
}

impl std::str::FromStr for Metastatic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "M0" | "m0" | "0" => Ok(Metastatic::M0),
            "M1" | "m1" | "1" => Ok(Metastatic::M1),
            other => Err(format!("unknown metastatic state {other:?}")),
        }
    }
}

/// Which deaths count as events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CauseRule {
    /// Deaths from the studied cause only.
    #[default]
    CauseSpecific,
    /// Deaths from any cause.
    AllCause,
    /// Cause-specific for M0 records, all-cause for M1 records.
    ByMetastatic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub id: String,
    pub age_at_diagnosis: f64,
    pub year_of_diagnosis: i64,
    pub survival_months: u32,
    pub death_flag: u8,
    pub death_cause_matches: u8,
    pub metastatic: Metastatic,
    /// Pass-through covariate values, in the order of the table's
    /// covariate names.
    #[serde(default)]
    pub covariates: Vec<String>,
}

impl SurvivalRecord {
    pub fn validate(&self) -> Result<(), SurvivalError> {
        let fail = |message: &str| SurvivalError::InvalidRecord {
            id: self.id.clone(),
            message: message.to_string(),
        };
        if self.death_flag > 1 || self.death_cause_matches > 1 {
            return Err(fail("death flags must be 0 or 1"));
        }
        if self.death_cause_matches > self.death_flag {
            return Err(fail("cause-specific death without a death"));
        }
        if !self.age_at_diagnosis.is_finite() {
            return Err(fail("age must be finite"));
        }
        Ok(())
    }

    pub fn survival_years(&self) -> f64 {
        f64::from(self.survival_months) / 12.0
    }

    /// Whether this record's death counts under `rule`.
    pub fn is_event(&self, rule: CauseRule) -> bool {
        let cause_specific = match rule {
            CauseRule::CauseSpecific => true,
            CauseRule::AllCause => false,
            CauseRule::ByMetastatic => self.metastatic == Metastatic::M0,
        };
        if cause_specific {
            self.death_cause_matches == 1
        } else {
            self.death_flag == 1
        }
    }

    /// Number of yearly intervals the record spans, at least one.
    pub fn max_duration(&self) -> u32 {
        self.survival_months.div_ceil(12).max(1)
    }
}

/// Fraction of interval `j` the individual was at risk.
pub fn initial_exposure(survival_years: f64, j: u32, max_duration: u32, died: bool) -> Result<f64, SurvivalError> {
    if j < 1 || j > max_duration {
        return Err(SurvivalError::InvalidArgument(format!(
            "interval {j} outside 1..={max_duration}"
        )));
    }
    let start = f64::from(j - 1);
    if survival_years <= start {
        return Err(SurvivalError::InternalConsistency(format!(
            "survival of {survival_years} years does not reach interval {j}"
        )));
    }
    if j < max_duration || died {
        return Ok(1.0);
    }
    Ok((survival_years - start).min(1.0))
}

/// `q̂ = d / (l − w + Σc)` where `w` is the number of withdrawals and `c`
/// their at-risk fractions.
pub fn balducci_rate(deaths: u64, alive_at_start: u64, withdrawal_fractions: &[f64]) -> Result<f64, SurvivalError> {
    if alive_at_start == 0 {
        return Err(SurvivalError::InvalidArgument("no one alive at start".into()));
    }
    if let Some(c) = withdrawal_fractions.iter().find(|c| !(**c > 0.0 && **c < 1.0)) {
        return Err(SurvivalError::InvalidArgument(format!(
            "withdrawal fraction {c} outside (0, 1)"
        )));
    }
    let exposure = alive_at_start as f64 - withdrawal_fractions.len() as f64
        + withdrawal_fractions.iter().sum::<f64>();
    if !(exposure > 0.0) {
        return Err(SurvivalError::DegenerateExposure(exposure));
    }
    Ok(deaths as f64 / exposure)
}

/// Five-year mortality rate `Σd / Σe`: an event within 60 months counts with
/// exposure 1, everyone else contributes `min(1, years / 5)`.
pub fn five_year_rate(records: &[SurvivalRecord], rule: CauseRule) -> Result<Metric, SurvivalError> {
    let mut deaths = 0.0;
    let mut exposure = 0.0;
    for r in records {
        r.validate()?;
        if r.is_event(rule) && r.survival_months <= 60 {
            deaths += 1.0;
            exposure += 1.0;
        } else {
            exposure += (r.survival_years() / 5.0).min(1.0);
        }
    }
    if records.is_empty() {
        return Ok(Metric::Undefined);
    }
    Ok(Metric::ratio(deaths, exposure))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoRow {
    pub id: String,
    pub j: u32,
    pub duration: u32,
    pub age: f64,
    pub year: i64,
    pub death: u8,
    pub exposure: f64,
    pub covariates: Vec<String>,
}

/// One row per started year of follow-up. Age and calendar year advance
/// with the interval; the event, if any, sits on the last row.
pub fn build_pseudo_table(records: &[SurvivalRecord], rule: CauseRule) -> Result<Vec<PseudoRow>, SurvivalError> {
    let mut out = Vec::new();
    for r in records {
        r.validate()?;
        let event = r.is_event(rule);
        let max = r.max_duration();
        for j in 1..=max {
            let last = j == max;
            let exposure = if r.survival_months == 0 || !last || event {
                1.0
            } else {
                f64::from(r.survival_months - 12 * (j - 1)) / 12.0
            };
            if !(exposure > 0.0 && exposure <= 1.0) {
                return Err(SurvivalError::InternalConsistency(format!(
                    "record {} interval {j} has exposure {exposure}",
                    r.id
                )));
            }
            out.push(PseudoRow {
                id: r.id.clone(),
                j,
                duration: j - 1,
                age: r.age_at_diagnosis + f64::from(j - 1),
                year: r.year_of_diagnosis + i64::from(j - 1),
                death: u8::from(event && last),
                exposure,
                covariates: r.covariates.clone(),
            });
        }
    }
    Ok(out)
}

fn format_exposure(v: f64, decimals: Option<usize>) -> String {
    match decimals {
        None => format!("{v}"),
        Some(d) => {
            let text = format!("{v:.d$}");
            if text.contains('.') {
                text.trim_end_matches('0').trim_end_matches('.').to_string()
            } else {
                text
            }
        }
    }
}

/// Writes `id, j, DURATION, AGE, YEAR, death, EXPO` followed by the
/// covariates. `exposure_decimals` rounds EXPO for display.
pub fn write_pseudo_csv<W: Write>(
    rows: &[PseudoRow],
    covariate_names: &[String],
    writer: W,
    exposure_decimals: Option<usize>,
) -> Result<(), SurvivalError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = vec!["id", "j", "DURATION", "AGE", "YEAR", "death", "EXPO"];
    header.extend(covariate_names.iter().map(String::as_str));
    wtr.write_record(&header)?;
    for r in rows {
        if r.covariates.len() != covariate_names.len() {
            return Err(SurvivalError::Schema(format!(
                "row for {} has {} covariates, expected {}",
                r.id,
                r.covariates.len(),
                covariate_names.len()
            )));
        }
        let mut record = vec![
            r.id.clone(),
            r.j.to_string(),
            r.duration.to_string(),
            format!("{}", r.age),
            r.year.to_string(),
            r.death.to_string(),
            format_exposure(r.exposure, exposure_decimals),
        ];
        record.extend(r.covariates.iter().cloned());
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Column names of a raw survival CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalColumns {
    pub id: String,
    pub age: String,
    pub year: String,
    pub months: String,
    pub death: String,
    /// Cause-specific death flag; defaults to the death flag.
    #[serde(default)]
    pub cause: Option<String>,
    /// Metastatic state column; every record is M0 when absent.
    #[serde(default)]
    pub metastatic: Option<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
}

pub fn read_survival_csv(path: &Path, columns: &SurvivalColumns) -> Result<Vec<SurvivalRecord>, SurvivalError> {
    let file = File::open(path).map_err(|source| SurvivalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_survival_from(file, columns)
}

pub fn read_survival_from<R: Read>(reader: R, columns: &SurvivalColumns) -> Result<Vec<SurvivalRecord>, SurvivalError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: BTreeMap<String, usize> = rdr
        .headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_string(), i))
        .collect();
    let find = |name: &str| {
        header
            .get(name)
            .copied()
            .ok_or_else(|| SurvivalError::Schema(format!("declared column {name} is absent")))
    };
    let id = find(&columns.id)?;
    let age = find(&columns.age)?;
    let year = find(&columns.year)?;
    let months = find(&columns.months)?;
    let death = find(&columns.death)?;
    let cause = columns.cause.as_deref().map(find).transpose()?;
    let metastatic = columns.metastatic.as_deref().map(find).transpose()?;
    let covariates = columns
        .covariates
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let field = |idx: usize| record.get(idx).unwrap_or("").trim();
        let parse_err = |name: &str, value: &str| SurvivalError::Format {
            row,
            message: format!("cannot parse {name} from {value:?}"),
        };
        let flag = |idx: usize, name: &str| -> Result<u8, SurvivalError> {
            match field(idx) {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(parse_err(name, other)),
            }
        };
        let death_flag = flag(death, &columns.death)?;
        let rec = SurvivalRecord {
            id: field(id).to_string(),
            age_at_diagnosis: field(age)
                .parse()
                .map_err(|_| parse_err(&columns.age, field(age)))?,
            year_of_diagnosis: field(year)
                .parse()
                .map_err(|_| parse_err(&columns.year, field(year)))?,
            survival_months: field(months)
                .parse()
                .map_err(|_| parse_err(&columns.months, field(months)))?,
            death_flag,
            death_cause_matches: match cause {
                Some(idx) => flag(idx, columns.cause.as_deref().unwrap_or_default())?,
                None => death_flag,
            },
            metastatic: match metastatic {
                Some(idx) => field(idx).parse().map_err(|message| SurvivalError::Format { row, message })?,
                None => Metastatic::M0,
            },
            covariates: covariates.iter().map(|&c| field(c).to_string()).collect(),
        };
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn record(id: &str, months: u32, death: u8) -> SurvivalRecord {
        SurvivalRecord {
            id: id.into(),
            age_at_diagnosis: 40.0,
            year_of_diagnosis: 2000,
            survival_months: months,
            death_flag: death,
            death_cause_matches: death,
            metastatic: Metastatic::M0,
            covariates: Vec::new(),
        }
    }

    #[test]
    fn exposure_rules() {
        assert_eq!(initial_exposure(0.33, 1, 1, true).unwrap(), 1.0);
        assert_abs_diff_eq!(initial_exposure(25.0 / 12.0, 3, 3, false).unwrap(), 0.08, epsilon = 0.005);
        assert_eq!(initial_exposure(25.0 / 12.0, 2, 3, false).unwrap(), 1.0);
        assert!(matches!(
            initial_exposure(1.5, 3, 3, false),
            Err(SurvivalError::InternalConsistency(_))
        ));
        assert!(initial_exposure(1.5, 0, 2, false).is_err());
    }

    #[test]
    fn balducci_examples() {
        assert_abs_diff_eq!(balducci_rate(1, 10, &[0.5, 0.5]).unwrap(), 1.0 / 9.0, epsilon = 1e-15);
        assert_eq!(balducci_rate(3, 12, &[]).unwrap(), 0.25);
        assert_eq!(balducci_rate(0, 5, &[0.2]).unwrap(), 0.0);
        assert!(matches!(
            balducci_rate(0, 1, &[0.5, 0.5, 0.5]),
            Err(SurvivalError::DegenerateExposure(_))
        ));
        assert!(balducci_rate(1, 10, &[1.0]).is_err());
    }

    #[test]
    fn five_year_examples() {
        assert_eq!(five_year_rate(&[record("a", 36, 1)], CauseRule::CauseSpecific).unwrap(), Metric::Value(1.0));
        assert_eq!(five_year_rate(&[record("a", 30, 0)], CauseRule::CauseSpecific).unwrap(), Metric::Value(0.0));
        assert_eq!(five_year_rate(&[], CauseRule::AllCause).unwrap(), Metric::Undefined);
        let cohort = [record("a", 36, 1), record("b", 30, 0), record("c", 80, 1)];
        assert_abs_diff_eq!(
            five_year_rate(&cohort, CauseRule::CauseSpecific).unwrap().value().unwrap(),
            1.0 / 2.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn cause_rules_follow_metastatic_state() {
        let mut r = record("a", 10, 1);
        r.death_cause_matches = 0;
        assert!(!r.is_event(CauseRule::CauseSpecific));
        assert!(r.is_event(CauseRule::AllCause));
        assert!(!r.is_event(CauseRule::ByMetastatic));
        r.metastatic = Metastatic::M1;
        assert!(r.is_event(CauseRule::ByMetastatic));
    }

    #[test]
    fn zero_months_gives_one_full_row() {
        for death in [0, 1] {
            let rows = build_pseudo_table(&[record("z", 0, death)], CauseRule::AllCause).unwrap();
            assert_eq!(rows.len(), 1);
            assert_eq!(rows[0].exposure, 1.0);
            assert_eq!(rows[0].death, death);
        }
    }

    #[test]
    fn invalid_records_are_rejected() {
        let mut r = record("x", 5, 0);
        r.death_cause_matches = 1;
        assert!(matches!(
            build_pseudo_table(&[r], CauseRule::CauseSpecific),
            Err(SurvivalError::InvalidRecord { .. })
        ));
    }

    #[test]
    fn exposure_formatting() {
        assert_eq!(format_exposure(1.0 / 12.0, Some(2)), "0.08");
        assert_eq!(format_exposure(1.0, Some(2)), "1");
        assert_eq!(format_exposure(0.5, Some(2)), "0.5");
        assert_eq!(format_exposure(0.25, None), "0.25");
    }

    #[test]
    fn reads_mapped_columns() {
        let text = "pid,age,yr,m,dead,site\n7,30,2001,14,1,skin\n8,44,2003,3,0,eye\n";
        let cols = SurvivalColumns {
            id: "pid".into(),
            age: "age".into(),
            year: "yr".into(),
            months: "m".into(),
            death: "dead".into(),
            cause: None,
            metastatic: None,
            covariates: vec!["site".into()],
        };
        let recs = read_survival_from(text.as_bytes(), &cols).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].death_cause_matches, 1);
        assert_eq!(recs[1].covariates, vec!["eye"]);
        let bad = "pid,age,yr,m,dead,site\n7,30,2001,x,1,skin\n";
        assert!(matches!(read_survival_from(bad.as_bytes(), &cols), Err(SurvivalError::Format { row: 1, .. })));
    }
}
