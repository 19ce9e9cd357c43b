//! Exposure-weighted binary logistic regression fitted by IRLS, with Wald
//! inference, threshold calibration, ROC/AUC and p-value selection.

use crate::metric::Metric;
use crate::numerics::{cholesky_factor, phi_upper};
use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

pub const INTERCEPT: &str = "const";
pub const GRADIENT_TOL: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 100;
const RIDGE_JITTER: f64 = 1e-10;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Error)]
pub enum GlmError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("weight {value} at row {row} is outside (0, 1]")]
    InvalidWeight { row: usize, value: f64 },
    #[error("response {value} at row {row} is not 0 or 1")]
    InvalidResponse { row: usize, value: f64 },
    #[error("column {0} is constant")]
    ConstantColumn(String),
    #[error("{rows} rows are too few for {params} parameters")]
    TooFewRows { rows: usize, params: usize },
    #[error("information matrix is singular even after ridge jitter")]
    SingularInformation,
    #[error("non-finite value in the design matrix at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    /// Parameter names, intercept first.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<Metric>,
    pub p_values: Vec<Metric>,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub gradient_max_norm: f64,
    /// Log-likelihood after each accepted step, starting value first.
    pub ll_trace: Vec<f64>,
    pub diagnostics: Vec<String>,
}

impl FittedModel {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.coefficients[i])
    }

    pub fn linear_predictor(&self, x: &Array2<f64>) -> Result<Array1<f64>, GlmError> {
        if x.ncols() + 1 != self.coefficients.len() {
            return Err(GlmError::Shape(format!(
                "model has {} features, data has {} columns",
                self.coefficients.len() - 1,
                x.ncols()
            )));
        }
        let beta = Array1::from(self.coefficients[1..].to_vec());
        Ok(x.dot(&beta) + self.coefficients[0])
    }
}

/// Prepends a column of ones.
pub fn with_intercept(x: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::ones((x.nrows(), x.ncols() + 1));
    out.slice_mut(ndarray::s![.., 1..]).assign(x);
    out
}

/// `log(1 + e^η)` without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

/// Inverse logit without overflow.
pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `Σ w_i [y_i η_i − log(1 + e^{η_i})]` for a design that already contains
/// the intercept column.
pub fn weighted_log_likelihood(design: &Array2<f64>, y: &[f64], w: &[f64], beta: &[f64]) -> f64 {
    let eta = design.dot(&ArrayView1::from(beta));
    eta.iter()
        .zip(y)
        .zip(w)
        .map(|((&e, &yi), &wi)| wi * (yi * e - softplus(e)))
        .sum()
}

/// Gradient of [`weighted_log_likelihood`]: `Σ w_i (y_i − q_i) x_i`.
pub fn weighted_score(design: &Array2<f64>, y: &[f64], w: &[f64], beta: &[f64]) -> Vec<f64> {
    let eta = design.dot(&ArrayView1::from(beta));
    let resid: Array1<f64> = eta
        .iter()
        .zip(y)
        .zip(w)
        .map(|((&e, &yi), &wi)| wi * (yi - sigmoid(e)))
        .collect();
    design.t().dot(&resid).to_vec()
}

fn information(design: &Array2<f64>, w: &[f64], beta: &[f64]) -> Array2<f64> {
    let eta = design.dot(&ArrayView1::from(beta));
    let mut weighted = design.clone();
    for (mut row, (&e, &wi)) in weighted.axis_iter_mut(Axis(0)).zip(eta.iter().zip(w)) {
        let q = sigmoid(e);
        row *= wi * q * (1.0 - q);
    }
    let info = design.t().dot(&weighted);
    (&info + &info.t()) * 0.5
}

fn rounding_scale(design: &Array2<f64>, w: &[f64], beta: &[f64]) -> f64 {
    let eta = design.dot(&ArrayView1::from(beta));
    eta.iter()
        .zip(w)
        .map(|(&e, &wi)| wi * (e.abs() + softplus(e)))
        .sum::<f64>()
        * 16.0
        * f64::EPSILON
}

fn validate(x: &Array2<f64>, y: &[f64], w: &[f64], names: &[String]) -> Result<(), GlmError> {
    let (rows, cols) = x.dim();
    if y.len() != rows || w.len() != rows || names.len() != cols {
        return Err(GlmError::Shape(format!(
            "design {rows}x{cols}, {} responses, {} weights, {} names",
            y.len(),
            w.len(),
            names.len()
        )));
    }
    if rows < cols + 2 {
        return Err(GlmError::TooFewRows {
            rows,
            params: cols + 1,
        });
    }
    if let Some(((row, column), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(GlmError::NonFinite { row, column });
    }
    for (row, &value) in y.iter().enumerate() {
        if value != 0.0 && value != 1.0 {
            return Err(GlmError::InvalidResponse { row, value });
        }
    }
    for (row, &value) in w.iter().enumerate() {
        if !(value > 0.0 && value <= 1.0) {
            return Err(GlmError::InvalidWeight { row, value });
        }
    }
    for (c, name) in names.iter().enumerate() {
        let col = x.column(c);
        let first = col[0];
        if col.iter().all(|v| *v == first) {
            return Err(GlmError::ConstantColumn(name.clone()));
        }
    }
    Ok(())
}

fn solve_spd(matrix: &Array2<f64>, rhs: &[f64]) -> Result<Vec<f64>, GlmError> {
    if let Ok(factor) = cholesky_factor(matrix) {
        return Ok(factor.solve(rhs));
    }
    let scale = matrix.diag().iter().cloned().fold(0.0_f64, f64::max).max(1.0);
    let mut jittered = matrix.clone();
    for i in 0..matrix.nrows() {
        jittered[[i, i]] += RIDGE_JITTER * scale;
    }
    cholesky_factor(&jittered)
        .map(|f| f.solve(rhs))
        .map_err(|_| GlmError::SingularInformation)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Maximizes `Σ w_i [δ_i log q_i + (1 − δ_i) log(1 − q_i)]` over the
/// coefficients of `x` plus an intercept named `"const"`.
///
/// Newton steps are halved until the log-likelihood does not decrease
/// beyond floating-point resolution. Convergence means a gradient max-norm
/// below [`GRADIENT_TOL`] within [`MAX_ITERATIONS`] steps. Degenerate
/// responses (single class, perfect separation) return `converged = false`
/// with a diagnostic instead of an error.
pub fn fit_weighted_logistic(
    x: &Array2<f64>,
    y: &[f64],
    w: &[f64],
    names: &[String],
) -> Result<FittedModel, GlmError> {
    validate(x, y, w, names)?;
    let design = with_intercept(x);
    let p = design.ncols();
    let total_w: f64 = w.iter().sum();
    let mean_y = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total_w;
    let mut beta = vec![0.0; p];
    beta[0] = {
        let m = mean_y.clamp(1e-6, 1.0 - 1e-6);
        (m / (1.0 - m)).ln()
    };

    let mut ll = weighted_log_likelihood(&design, y, w, &beta);
    let mut trace = vec![ll];
    let mut diagnostics = Vec::new();
    let mut grad = weighted_score(&design, y, w, &beta);
    let mut iterations = 0;
    let mut converged = false;
    let single_class = mean_y == 0.0 || mean_y == 1.0;

    if !single_class {
        while iterations < MAX_ITERATIONS {
            if max_abs(&grad) < GRADIENT_TOL {
                converged = true;
                break;
            }
            let info = information(&design, w, &beta);
            let step = solve_spd(&info, &grad)?;
            let slack = rounding_scale(&design, w, &beta);
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let candidate: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
                let cand_ll = weighted_log_likelihood(&design, y, w, &candidate);
                if cand_ll.is_finite() && cand_ll >= ll - slack {
                    accepted = Some((candidate, cand_ll));
                    break;
                }
                t *= 0.5;
            }
            iterations += 1;
            match accepted {
                Some((b, l)) => {
                    beta = b;
                    ll = l;
                    trace.push(ll);
                    grad = weighted_score(&design, y, w, &beta);
                }
                None => {
                    diagnostics.push("step halving failed to improve the log-likelihood".into());
                    break;
                }
            }
        }
        if !converged && max_abs(&grad) < GRADIENT_TOL {
            converged = true;
        }
        if !converged && iterations >= MAX_ITERATIONS {
            diagnostics.push(format!("no convergence after {MAX_ITERATIONS} iterations"));
        }
    }

    if single_class || ll.abs() < 1e-6 * total_w {
        converged = false;
        diagnostics.push(
            "monotone likelihood: the response is perfectly separated or has a single class, \
             so the maximum-likelihood estimate does not exist"
                .into(),
        );
    }

    let info = information(&design, w, &beta);
    let (standard_errors, p_values) = match cholesky_factor(&info) {
        Ok(factor) => {
            let mut se = Vec::with_capacity(p);
            let mut pv = Vec::with_capacity(p);
            for k in 0..p {
                let mut e = vec![0.0; p];
                e[k] = 1.0;
                let var = factor.solve(&e)[k];
                if var > 0.0 && var.is_finite() {
                    let s = var.sqrt();
                    se.push(Metric::Value(s));
                    pv.push(Metric::Value((2.0 * phi_upper((beta[k] / s).abs())).min(1.0)));
                } else {
                    se.push(Metric::Undefined);
                    pv.push(Metric::Undefined);
                }
            }
            (se, pv)
        }
        Err(_) => {
            diagnostics.push("information matrix not invertible at the estimate".into());
            (vec![Metric::Undefined; p], vec![Metric::Undefined; p])
        }
    };

    let mut all_names = Vec::with_capacity(p);
    all_names.push(INTERCEPT.to_string());
    all_names.extend(names.iter().cloned());
    Ok(FittedModel {
        names: all_names,
        coefficients: beta,
        standard_errors,
        p_values,
        converged,
        iterations,
        log_likelihood: ll,
        gradient_max_norm: max_abs(&grad),
        ll_trace: trace,
        diagnostics,
    })
}

pub fn predict_proba(model: &FittedModel, x: &Array2<f64>) -> Result<Vec<f64>, GlmError> {
    Ok(model.linear_predictor(x)?.iter().map(|&e| sigmoid(e)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub realized_rate: f64,
    /// Equal probabilities straddle the threshold, so the target rate could
    /// not be met more closely.
    pub ties_at_boundary: bool,
}

/// Smallest observed threshold `τ` with `fraction(p ≥ τ) ≤ target_rate`.
/// When no observed value qualifies, `τ` is just above the maximum.
pub fn calibrate_threshold(probabilities: &[f64], target_rate: f64) -> Result<ThresholdChoice, GlmError> {
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(GlmError::InvalidArgument(format!(
            "target rate must lie in (0, 1), got {target_rate}"
        )));
    }
    if probabilities.is_empty() || probabilities.iter().any(|p| !p.is_finite()) {
        return Err(GlmError::InvalidArgument(
            "probabilities must be non-empty and finite".into(),
        ));
    }
    let n = probabilities.len() as f64;
    let mut sorted = probabilities.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut threshold = sorted[0].next_up();
    let mut count = 0usize;
    let mut blocked_multiplicity = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == v {
            j += 1;
        }
        if j as f64 / n <= target_rate {
            threshold = v;
            count = j;
            i = j;
        } else {
            blocked_multiplicity = j - i;
            break;
        }
    }
    Ok(ThresholdChoice {
        threshold,
        realized_rate: count as f64 / n,
        ties_at_boundary: blocked_multiplicity > 1,
    })
}

/// `p ≥ τ → 1`, else 0.
pub fn classify(probabilities: &[f64], threshold: f64) -> Vec<f64> {
    probabilities
        .iter()
        .map(|&p| if p >= threshold { 1.0 } else { 0.0 })
        .collect()
}

fn check_binary(y: &[f64], scores: &[f64]) -> Result<(), GlmError> {
    if y.len() != scores.len() {
        return Err(GlmError::Shape(format!(
            "{} labels vs {} scores",
            y.len(),
            scores.len()
        )));
    }
    if let Some(row) = y.iter().position(|v| *v != 0.0 && *v != 1.0) {
        return Err(GlmError::InvalidResponse { row, value: y[row] });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(GlmError::InvalidArgument("scores contain NaN".into()));
    }
    Ok(())
}

/// Mann–Whitney concordance probability with ties counted one half.
pub fn roc_auc(y: &[f64], scores: &[f64]) -> Result<Metric, GlmError> {
    check_binary(y, scores)?;
    let n_pos = y.iter().filter(|v| **v == 1.0).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Ok(Metric::Undefined);
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        rank_sum_pos += avg_rank * order[i..j].iter().filter(|&&k| y[k] == 1.0).count() as f64;
        i = j;
    }
    let np = n_pos as f64;
    Ok(Metric::Value(
        (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * n_neg as f64),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC points for thresholds at every distinct score, descending, preceded
/// by a threshold above every score.
pub fn roc_curve(y: &[f64], scores: &[f64]) -> Result<Vec<RocPoint>, GlmError> {
    check_binary(y, scores)?;
    let n_pos = y.iter().filter(|v| **v == 1.0).count() as f64;
    let n_neg = y.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return Err(GlmError::InvalidArgument("ROC curve needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let top = order.first().map_or(1.0, |&k| scores[k].next_up());
    let mut points = vec![RocPoint {
        threshold: top,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if y[order[i]] == 1.0 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: s,
            fpr: fp / n_neg,
            tpr: tp / n_pos,
        });
    }
    Ok(points)
}

pub fn write_roc_csv<W: Write>(points: &[RocPoint], writer: W) -> Result<(), GlmError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["threshold", "fpr", "tpr"])?;
    for p in points {
        wtr.write_record([p.threshold.to_string(), p.fpr.to_string(), p.tpr.to_string()])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Intercept plus every parameter with a p-value at most `alpha`.
pub fn select_by_pvalue(model: &FittedModel, alpha: f64) -> Vec<String> {
    model
        .names
        .iter()
        .zip(&model.p_values)
        .filter(|(name, p)| {
            name.as_str() == INTERCEPT || p.value().is_some_and(|p| p <= alpha)
        })
        .map(|(name, _)| name.clone())
        .collect()
}
