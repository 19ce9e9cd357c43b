//! Transition matrix that keeps sensitive columns fixed and replaces every
//! other column by its closest variant uncorrelated with all sensitive ones.

use crate::numerics::{psd_pseudo_inverse, NumericsError};
use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Gram eigenvalues below this fraction of the largest are treated as zero.
pub const PSEUDO_INVERSE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum DecorrelateError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("vector {index} is linearly dependent on the previous ones")]
    RankDeficient { index: usize },
    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub dim: usize,
    pub sensitive_indices: Vec<usize>,
    /// Row `k` gives the new column `k` as a combination of the old ones.
    pub rows: Vec<Vec<f64>>,
    pub column_means: Vec<f64>,
    /// Numerical rank of the sensitive block.
    pub sensitive_rank: usize,
    /// Non-sensitive columns with zero variance, left unchanged.
    pub passthrough: Vec<usize>,
    pub warnings: Vec<String>,
}

impl TransitionMatrix {
    pub fn identity(dim: usize, sensitive_indices: Vec<usize>) -> Self {
        let rows = (0..dim)
            .map(|i| (0..dim).map(|j| f64::from(u8::from(i == j))).collect())
            .collect();
        Self {
            dim,
            sensitive_rank: sensitive_indices.len(),
            sensitive_indices,
            rows,
            column_means: vec![0.0; dim],
            passthrough: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn to_array(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.dim, self.dim), |(i, j)| self.rows[i][j])
    }

    pub fn is_sensitive(&self, column: usize) -> bool {
        self.sensitive_indices.contains(&column)
    }

    /// Largest absolute deviation from the identity matrix.
    pub fn distance_from_identity(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (i, row) in self.rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }
}

fn validate_input(data: &Array2<f64>, sensitive_indices: &[usize]) -> Result<(), DecorrelateError> {
    let (rows, n) = data.dim();
    let s = sensitive_indices.len();
    if s == 0 {
        return Err(DecorrelateError::InvalidArgument(
            "at least one sensitive column is required".into(),
        ));
    }
    if n < s + 1 {
        return Err(DecorrelateError::Shape(format!(
            "{n} columns cannot hold {s} sensitive columns and a feature"
        )));
    }
    if rows < s + 2 {
        return Err(DecorrelateError::Shape(format!(
            "{rows} rows are too few for {s} sensitive columns"
        )));
    }
    for (i, &idx) in sensitive_indices.iter().enumerate() {
        if idx >= n {
            return Err(DecorrelateError::InvalidArgument(format!(
                "sensitive index {idx} out of range for {n} columns"
            )));
        }
        if sensitive_indices[..i].contains(&idx) {
            return Err(DecorrelateError::InvalidArgument(format!(
                "sensitive index {idx} listed twice"
            )));
        }
    }
    if let Some(((row, column), _)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(DecorrelateError::NonFinite { row, column });
    }
    Ok(())
}

fn centered(column: ArrayView1<f64>, mean: f64) -> Array1<f64> {
    column.mapv(|v| v - mean)
}

/// Fits the transition matrix on `data` (rows × columns).
///
/// For every non-sensitive column `u_k` the new column is the residual of
/// the least-squares regression of `u_k` on the centered sensitive columns,
/// so `a_kk = 1` and `a_kj = −β_j` for sensitive `j`. A rank-deficient
/// sensitive block is handled through the pseudo-inverse of its Gram matrix.
pub fn fit_transition(data: &Array2<f64>, sensitive_indices: &[usize]) -> Result<TransitionMatrix, DecorrelateError> {
    validate_input(data, sensitive_indices)?;
    let (rows, n) = data.dim();
    let s = sensitive_indices.len();
    let means: Vec<f64> = data
        .mean_axis(Axis(0))
        .expect("at least one row")
        .to_vec();
    let mut sens = Array2::zeros((rows, s));
    for (c, &idx) in sensitive_indices.iter().enumerate() {
        sens.column_mut(c).assign(&centered(data.column(idx), means[idx]));
    }
    let gram = sens.t().dot(&sens);
    let (gram_inv, rank) = psd_pseudo_inverse(&gram, PSEUDO_INVERSE_TOL)?;

    let mut out = TransitionMatrix::identity(n, sensitive_indices.to_vec());
    out.column_means = means.clone();
    out.sensitive_rank = rank;
    if rank < s {
        let msg = format!("sensitive block has rank {rank} < {s}; using the pseudo-inverse");
        log::warn!("{msg}");
        out.warnings.push(msg);
    }

    for k in (0..n).filter(|k| !sensitive_indices.contains(k)) {
        let u = centered(data.column(k), means[k]);
        if u.iter().all(|v| *v == 0.0) {
            let msg = format!("column {k} has zero variance; passed through unchanged");
            log::warn!("{msg}");
            out.warnings.push(msg);
            out.passthrough.push(k);
            continue;
        }
        let mut beta = gram_inv.dot(&sens.t().dot(&u));
        let residual = &u - &sens.dot(&beta);
        beta += &gram_inv.dot(&sens.t().dot(&residual));
        for (c, &idx) in sensitive_indices.iter().enumerate() {
            out.rows[k][idx] = -beta[c];
        }
    }
    Ok(out)
}

/// Applies `X' = A X` row by row. Sensitive columns are copied unchanged.
pub fn apply_transition(t: &TransitionMatrix, data: &Array2<f64>) -> Result<Array2<f64>, DecorrelateError> {
    if data.ncols() != t.dim {
        return Err(DecorrelateError::Shape(format!(
            "data has {} columns, transition expects {}",
            data.ncols(),
            t.dim
        )));
    }
    let mut out = data.clone();
    for k in 0..t.dim {
        if t.is_sensitive(k) {
            continue;
        }
        let mut col = data.column(k).to_owned();
        for &j in &t.sensitive_indices {
            let a = t.rows[k][j];
            if a != 0.0 {
                col.scaled_add(a, &data.column(j));
            }
        }
        out.column_mut(k).assign(&col);
    }
    Ok(out)
}

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n
}

/// Gram–Schmidt under the covariance inner product. The first vector is
/// returned as is; each later one has its projections on the earlier
/// outputs removed.
pub fn gram_schmidt(vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, DecorrelateError> {
    let Some(first) = vectors.first() else {
        return Ok(Vec::new());
    };
    let len = first.len();
    if len < 2 || vectors.iter().any(|v| v.len() != len) {
        return Err(DecorrelateError::Shape(
            "vectors must share a length of at least 2".into(),
        ));
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    let mut variances: Vec<f64> = Vec::with_capacity(vectors.len());
    for (index, u) in vectors.iter().enumerate() {
        let scale = covariance(u, u);
        let mut v = u.clone();
        for (w, &var_w) in out.iter().zip(&variances) {
            let coef = covariance(&v, w) / var_w;
            for (vi, wi) in v.iter_mut().zip(w) {
                *vi -= coef * wi;
            }
        }
        let var_v = covariance(&v, &v);
        if !(scale > 0.0) || var_v <= 1e-20 * scale {
            return Err(DecorrelateError::RankDeficient { index });
        }
        out.push(v);
        variances.push(var_v);
    }
    Ok(out)
}
