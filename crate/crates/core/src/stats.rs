//! Replicate-level aggregation: mean confidence intervals and percentile
//! bootstrap intervals.

use crate::fairness::FlatRecord;
use crate::metric::Metric;
use crate::numerics::{std_normal_quantile, RandomStream};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::io::Write;
use thiserror::Error;

/// Sample sizes up to this use Student-t quantiles, larger ones the normal.
pub const STUDENT_T_MAX_N: usize = 30;
pub const MIN_RESAMPLES: usize = 100;
const BOOTSTRAP_BATCH: usize = 64;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    StudentT,
    Normal,
    BootstrapPercentile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub mean: Metric,
    pub half_width: Metric,
    pub lower: Metric,
    pub upper: Metric,
    pub level: f64,
    pub method: IntervalMethod,
    pub n: usize,
}

impl IntervalEstimate {
    /// `mean±half_width` after multiplying by `scale`, e.g. `94.13±0.05`.
    pub fn format_pm(&self, scale: f64, decimals: usize) -> String {
        let show = |m: Metric| match m {
            Metric::Value(v) => format!("{:.*}", decimals, v * scale),
            Metric::Undefined => "undefined".to_string(),
        };
        format!("{}±{}", show(self.mean), show(self.half_width))
    }

    fn degenerate(values: &[f64], level: f64) -> Self {
        let mean = if values.is_empty() {
            Metric::Undefined
        } else {
            Metric::Value(values.iter().sum::<f64>() / values.len() as f64)
        };
        Self {
            mean,
            half_width: Metric::Undefined,
            lower: Metric::Undefined,
            upper: Metric::Undefined,
            level,
            method: IntervalMethod::StudentT,
            n: values.len(),
        }
    }
}

fn check_level(level: f64) -> Result<(), StatsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidArgument(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    Ok(())
}

/// Two-sided critical value for `n` observations.
pub fn critical_value(n: usize, level: f64) -> Result<(f64, IntervalMethod), StatsError> {
    check_level(level)?;
    if n < 2 {
        return Err(StatsError::InsufficientData { needed: 2, got: n });
    }
    let p = 0.5 + level / 2.0;
    if n <= STUDENT_T_MAX_N {
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .map_err(|e| StatsError::InvalidArgument(e.to_string()))?;
        Ok((t.inverse_cdf(p), IntervalMethod::StudentT))
    } else {
        let z = std_normal_quantile(p).map_err(|e| StatsError::InvalidArgument(e.to_string()))?;
        Ok((z, IntervalMethod::Normal))
    }
}

/// `mean ± q · sd / sqrt(n)` with the unbiased standard deviation.
pub fn mean_ci(values: &[f64], level: f64) -> Result<IntervalEstimate, StatsError> {
    let n = values.len();
    let (q, method) = critical_value(n, level)?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::InvalidArgument("values must be finite".into()));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    let half = q * var.sqrt() / nf.sqrt();
    Ok(IntervalEstimate {
        mean: Metric::Value(mean),
        half_width: Metric::Value(half),
        lower: Metric::Value(mean - half),
        upper: Metric::Value(mean + half),
        level,
        method,
        n,
    })
}

/// Linear-interpolation quantile of sorted data.
fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval of `statistic`. Resamples are drawn in
/// fixed-size batches, batch `b` from `stream.derive(b)`, so the result does
/// not depend on how batches are scheduled.
pub fn bootstrap_ci<F>(
    values: &[f64],
    statistic: F,
    resamples: usize,
    level: f64,
    stream: RandomStream,
) -> Result<IntervalEstimate, StatsError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_level(level)?;
    let n = values.len();
    if n < 2 {
        return Err(StatsError::InsufficientData { needed: 2, got: n });
    }
    if resamples < MIN_RESAMPLES {
        return Err(StatsError::InvalidArgument(format!(
            "at least {MIN_RESAMPLES} resamples are required, got {resamples}"
        )));
    }
    let batches = resamples.div_ceil(BOOTSTRAP_BATCH);
    let mut stats: Vec<f64> = (0..batches)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = stream.derive(b as u64).rng();
            let count = BOOTSTRAP_BATCH.min(resamples - b * BOOTSTRAP_BATCH);
            let mut sample = vec![0.0; n];
            let statistic = &statistic;
            (0..count)
                .map(move |_| {
                    for s in sample.iter_mut() {
                        *s = values[rng.random_range(0..n)];
                    }
                    statistic(&sample)
                })
                .collect::<Vec<f64>>()
        })
        .collect();
    if stats.iter().any(|s| s.is_nan()) {
        return Err(StatsError::InvalidArgument("statistic returned NaN".into()));
    }
    stats.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    let lower = sorted_quantile(&stats, alpha / 2.0);
    let upper = sorted_quantile(&stats, 1.0 - alpha / 2.0);
    Ok(IntervalEstimate {
        mean: Metric::Value(statistic(values)),
        half_width: Metric::Value((upper - lower) / 2.0),
        lower: Metric::Value(lower),
        upper: Metric::Value(upper),
        level,
        method: IntervalMethod::BootstrapPercentile,
        n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scope: String,
    pub metric: String,
    pub estimate: IntervalEstimate,
    /// Replicates in which the metric was defined.
    pub defined: usize,
}

/// One interval per `(scope, metric)` across replicate reports. Every
/// report must list the same keys in the same order. Undefined values are
/// skipped; fewer than two defined values give an undefined half-width.
pub fn replicate_summary(reports: &[Vec<FlatRecord>], level: f64) -> Result<Vec<SummaryRow>, StatsError> {
    check_level(level)?;
    let Some(first) = reports.first() else {
        return Err(StatsError::InsufficientData { needed: 1, got: 0 });
    };
    for (r, report) in reports.iter().enumerate().skip(1) {
        let same = report.len() == first.len()
            && report
                .iter()
                .zip(first)
                .all(|(a, b)| a.scope == b.scope && a.metric == b.metric);
        if !same {
            return Err(StatsError::Schema(format!(
                "replicate {r} does not match the shape of replicate 0"
            )));
        }
    }
    let mut rows = Vec::with_capacity(first.len());
    for (k, key) in first.iter().enumerate() {
        let values: Vec<f64> = reports.iter().filter_map(|r| r[k].value.value()).collect();
        let estimate = if values.len() >= 2 {
            mean_ci(&values, level)?
        } else {
            IntervalEstimate::degenerate(&values, level)
        };
        rows.push(SummaryRow {
            scope: key.scope.clone(),
            metric: key.metric.clone(),
            estimate,
            defined: values.len(),
        });
    }
    Ok(rows)
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], writer: W) -> Result<(), StatsError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["scope", "metric", "mean", "half_width", "lower", "upper", "level", "method", "n", "display"])?;
    for r in rows {
        let e = &r.estimate;
        let method = match e.method {
            IntervalMethod::StudentT => "student_t",
            IntervalMethod::Normal => "normal",
            IntervalMethod::BootstrapPercentile => "bootstrap_percentile",
        };
        wtr.write_record([
            r.scope.clone(),
            r.metric.clone(),
            e.mean.to_string(),
            e.half_width.to_string(),
            e.lower.to_string(),
            e.upper.to_string(),
            e.level.to_string(),
            method.to_string(),
            r.defined.to_string(),
            e.format_pm(100.0, 2),
        ])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(m: Metric) -> f64 {
        m.value().unwrap()
    }

    #[test]
    fn constant_values_have_zero_width() {
        let ci = mean_ci(&[3.0; 10], 0.95).unwrap();
        assert_eq!(ci.half_width, Metric::Value(0.0));
        assert_eq!(ci.method, IntervalMethod::StudentT);
    }

    #[test]
    fn large_n_uses_normal_quantile() {
        let values: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let ci = mean_ci(&values, 0.95).unwrap();
        let sd = (100.0f64 / 99.0).sqrt();
        assert_eq!(ci.method, IntervalMethod::Normal);
        assert_abs_diff_eq!(v(ci.half_width) / sd, 0.196, epsilon = 1e-4);
    }

    #[test]
    fn two_values_use_t_with_one_df() {
        let ci = mean_ci(&[0.0, 1.0], 0.95).unwrap();
        let sd = 0.5f64.sqrt();
        assert_abs_diff_eq!(v(ci.half_width), 12.7062 * sd / 2f64.sqrt(), epsilon = 1e-3);
        assert_abs_diff_eq!(v(ci.mean), 0.5);
    }

    #[test]
    fn too_few_values() {
        assert!(matches!(mean_ci(&[1.0], 0.95), Err(StatsError::InsufficientData { .. })));
        assert!(mean_ci(&[1.0, 2.0], 1.5).is_err());
    }

    #[test]
    fn bootstrap_constant_and_determinism() {
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        let s = RandomStream::new(4, 0);
        let c = bootstrap_ci(&[2.0; 20], mean, 200, 0.95, s).unwrap();
        assert_eq!(c.half_width, Metric::Value(0.0));
        let data: Vec<f64> = (0..50).map(|i| (i * 7 % 13) as f64).collect();
        let a = bootstrap_ci(&data, mean, 500, 0.95, s).unwrap();
        let b = bootstrap_ci(&data, mean, 500, 0.95, s).unwrap();
        assert_eq!(a, b);
        assert!(bootstrap_ci(&data, mean, 50, 0.95, s).is_err());
    }

    fn rec(scope: &str, metric: &str, value: Metric) -> FlatRecord {
        FlatRecord {
            scope: scope.into(),
            metric: metric.into(),
            value,
        }
    }

    #[test]
    fn summary_examples() {
        let a = vec![rec("global", "acceptance_rate", Metric::Value(0.9)), rec("global", "tpr", Metric::Undefined)];
        let b = vec![rec("global", "acceptance_rate", Metric::Value(0.8)), rec("global", "tpr", Metric::Value(0.5))];
        let rows = replicate_summary(&[a.clone(), b], 0.95).unwrap();
        assert_abs_diff_eq!(v(rows[0].estimate.mean), 0.85, epsilon = 1e-15);
        assert_eq!(rows[1].defined, 1);
        assert_eq!(rows[1].estimate.half_width, Metric::Undefined);

        let same = replicate_summary(&[a.clone(), a.clone(), a.clone()], 0.95).unwrap();
        assert_eq!(same[0].estimate.half_width, Metric::Value(0.0));

        let other = vec![rec("global", "fpr", Metric::Value(0.1))];
        assert!(matches!(replicate_summary(&[a, other], 0.95), Err(StatsError::Schema(_))));
    }

    #[test]
    fn plus_minus_format() {
        let e = IntervalEstimate {
            mean: Metric::Value(0.9413),
            half_width: Metric::Value(0.0005),
            lower: Metric::Undefined,
            upper: Metric::Undefined,
            level: 0.95,
            method: IntervalMethod::Normal,
            n: 100,
        };
        assert_eq!(e.format_pm(100.0, 2), "94.13±0.05");
    }
}
