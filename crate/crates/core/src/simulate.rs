//! Gaussian-copula simulation of mixed normal, uniform and Bernoulli columns.

use crate::numerics::{
    cholesky_factor, phi, quantile_unchecked, sample_mvn, std_normal_pdf, LowerTriangular,
    NumericsError, RandomStream,
};
use crate::tabular::{Column, Dataset, Role, TabularError};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("strict-lower row {0} has squared norm >= 1")]
    InvalidCholeskyRow(usize),
    #[error("correlation entry ({0}, {1}) is outside [-1, 1] or inconsistent")]
    InvalidCorrelation(usize, usize),
    #[error("no attenuation formula for the pair {0}")]
    UnsupportedPair(String),
    #[error("invalid marginal {index}: {message}")]
    InvalidMarginal { index: usize, message: String },
    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Tabular(#[from] TabularError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    /// `sd` is the standard deviation.
    Normal { mean: f64, sd: f64 },
    Uniform { a: f64, b: f64 },
    Bernoulli { p: f64 },
}

impl Marginal {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            Marginal::Normal { mean, sd } => {
                if !mean.is_finite() || !(sd > 0.0 && sd.is_finite()) {
                    return Err(format!("normal needs finite mean and sd > 0, got ({mean}, {sd})"));
                }
            }
            Marginal::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(format!("uniform needs a < b, got ({a}, {b})"));
                }
            }
            Marginal::Bernoulli { p } => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(format!("bernoulli needs 0 < p < 1, got {p}"));
                }
            }
        }
        Ok(())
    }

    fn label(&self) -> &'static str {
        match self {
            Marginal::Normal { .. } => "normal",
            Marginal::Uniform { .. } => "uniform",
            Marginal::Bernoulli { .. } => "bernoulli",
        }
    }

    /// Maps a latent standard normal draw to this marginal.
    pub fn transform(&self, z: f64) -> f64 {
        match *self {
            Marginal::Normal { mean, sd } => mean + sd * z,
            Marginal::Uniform { a, b } => a + (b - a) * phi(z),
            Marginal::Bernoulli { p } => f64::from(bernoulli_threshold(phi(z), p)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub marginal: Marginal,
}

impl MarginalSpec {
    pub fn named(name: &str, marginal: Marginal) -> Self {
        Self {
            name: Some(name.to_string()),
            marginal,
        }
    }
}

/// How the latent correlation matrix is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentSpec {
    /// Strict-lower Cholesky entries, row-major: L21, L31, L32, L41, ...
    CholeskyStrictLower(Vec<f64>),
    /// The latent correlation matrix itself.
    LatentCorr(Vec<Vec<f64>>),
    /// Desired observed correlations; pairs with one normal column are
    /// divided by the attenuation factor, other pairs are used as given.
    TargetCorr(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub marginals: Vec<MarginalSpec>,
    pub latent: LatentSpec,
    pub roles: Vec<Role>,
    pub rows: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.marginals
            .iter()
            .enumerate()
            .map(|(i, m)| m.name.clone().unwrap_or_else(|| format!("V{}", i + 1)))
            .collect()
    }

    pub fn validate(&self) -> Result<(), SimulateError> {
        if self.marginals.is_empty() {
            return Err(SimulateError::InvalidSpec("no marginals".into()));
        }
        for (index, m) in self.marginals.iter().enumerate() {
            m.marginal
                .validate()
                .map_err(|message| SimulateError::InvalidMarginal { index, message })?;
        }
        if self.roles.len() != self.dim() {
            return Err(SimulateError::InvalidSpec(format!(
                "{} roles for {} marginals",
                self.roles.len(),
                self.dim()
            )));
        }
        if self.rows == 0 || self.replicates == 0 {
            return Err(SimulateError::InvalidSpec(
                "rows and replicates must be positive".into(),
            ));
        }
        let names = self.column_names();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(SimulateError::InvalidSpec(format!("duplicate column name {n}")));
            }
        }
        self.latent_factor().map(|_| ())
    }

    /// Latent correlation matrix implied by the `latent` field.
    pub fn latent_correlation(&self) -> Result<Array2<f64>, SimulateError> {
        let n = self.dim();
        match &self.latent {
            LatentSpec::CholeskyStrictLower(entries) => {
                if entries.len() != n * (n - 1) / 2 {
                    return Err(SimulateError::InvalidSpec(format!(
                        "{} strict-lower entries for dimension {n}, expected {}",
                        entries.len(),
                        n * (n - 1) / 2
                    )));
                }
                build_latent_correlation(n, entries)
            }
            LatentSpec::LatentCorr(rows) => {
                let m = matrix_from_rows(rows, n)?;
                check_correlation(&m)?;
                Ok(m)
            }
            LatentSpec::TargetCorr(rows) => {
                let m = matrix_from_rows(rows, n)?;
                check_correlation(&m)?;
                let marginals: Vec<Marginal> = self.marginals.iter().map(|m| m.marginal).collect();
                let latent = invert_attenuation(&m, &marginals)?;
                check_correlation(&latent)?;
                Ok(latent)
            }
        }
    }

    pub fn latent_factor(&self) -> Result<LowerTriangular, SimulateError> {
        Ok(cholesky_factor(&self.latent_correlation()?)?)
    }
}

fn matrix_from_rows(rows: &[Vec<f64>], n: usize) -> Result<Array2<f64>, SimulateError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(SimulateError::InvalidSpec(format!(
            "correlation matrix must be {n}x{n}"
        )));
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]))
}

fn check_correlation(m: &Array2<f64>) -> Result<(), SimulateError> {
    let n = m.nrows();
    for i in 0..n {
        if (m[[i, i]] - 1.0).abs() > 1e-12 {
            return Err(SimulateError::InvalidCorrelation(i, i));
        }
        for j in 0..i {
            let v = m[[i, j]];
            if !(v.abs() <= 1.0) || (v - m[[j, i]]).abs() > 1e-12 {
                return Err(SimulateError::InvalidCorrelation(i, j));
            }
        }
    }
    Ok(())
}

/// `R_Z = L Lᵀ` where `L` has the given strict-lower entries (row-major)
/// and diagonal `L_ii = sqrt(1 − Σ_k L_ik²)`.
pub fn build_latent_correlation(dim: usize, strict_lower: &[f64]) -> Result<Array2<f64>, SimulateError> {
    if dim == 0 || strict_lower.len() != dim * (dim - 1) / 2 {
        return Err(SimulateError::InvalidSpec(format!(
            "{} strict-lower entries for dimension {dim}",
            strict_lower.len()
        )));
    }
    let mut packed = Vec::with_capacity(dim * (dim + 1) / 2);
    let mut offset = 0;
    for i in 0..dim {
        let row = &strict_lower[offset..offset + i];
        offset += i;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(SimulateError::InvalidCholeskyRow(i));
        }
        let ss: f64 = row.iter().map(|v| v * v).sum();
        if ss >= 1.0 {
            return Err(SimulateError::InvalidCholeskyRow(i));
        }
        packed.extend_from_slice(row);
        packed.push((1.0 - ss).sqrt());
    }
    let mut r = LowerTriangular::from_packed(dim, packed)?.gram();
    for i in 0..dim {
        r[[i, i]] = 1.0;
        for j in 0..i {
            let v = r[[i, j]];
            if v.abs() > 1.0 + 1e-12 {
                return Err(SimulateError::InvalidCorrelation(i, j));
            }
            let v = v.clamp(-1.0, 1.0);
            r[[i, j]] = v;
            r[[j, i]] = v;
        }
    }
    cholesky_factor(&r)?;
    Ok(r)
}

/// Factor `f` with `corr(X_i, X_j) = f · ρ_latent` for the supported pairs.
pub fn attenuation_factor(a: &Marginal, b: &Marginal) -> Result<f64, SimulateError> {
    match (a, b) {
        (Marginal::Normal { .. }, Marginal::Normal { .. }) => Ok(1.0),
        (Marginal::Uniform { .. }, Marginal::Normal { .. })
        | (Marginal::Normal { .. }, Marginal::Uniform { .. }) => {
            Ok((3.0 / std::f64::consts::PI).sqrt())
        }
        (Marginal::Bernoulli { p }, Marginal::Normal { .. })
        | (Marginal::Normal { .. }, Marginal::Bernoulli { p }) => Ok(bernoulli_normal_factor(*p)),
        _ => Err(SimulateError::UnsupportedPair(format!(
            "{}-{}",
            a.label(),
            b.label()
        ))),
    }
}

/// `φ(Φ⁻¹(τ)) / sqrt(τ(1 − τ))` with `τ = 1 − p`.
pub fn bernoulli_normal_factor(p: f64) -> f64 {
    let tau = 1.0 - p;
    std_normal_pdf(quantile_unchecked(tau)) / (tau * (1.0 - tau)).sqrt()
}

/// Converts desired observed correlations into latent ones. Pairs involving
/// a normal column are divided by their attenuation factor; all other pairs
/// are copied.
pub fn invert_attenuation(target: &Array2<f64>, marginals: &[Marginal]) -> Result<Array2<f64>, SimulateError> {
    let n = marginals.len();
    if target.dim() != (n, n) {
        return Err(SimulateError::InvalidSpec(format!(
            "target matrix must be {n}x{n}"
        )));
    }
    let mut latent = target.clone();
    for i in 0..n {
        for j in 0..i {
            let involves_normal = matches!(marginals[i], Marginal::Normal { .. })
                || matches!(marginals[j], Marginal::Normal { .. });
            if involves_normal {
                let f = attenuation_factor(&marginals[i], &marginals[j])?;
                let v = target[[i, j]] / f;
                if v.abs() > 1.0 {
                    return Err(SimulateError::InvalidCorrelation(i, j));
                }
                latent[[i, j]] = v;
                latent[[j, i]] = v;
            }
        }
    }
    Ok(latent)
}

/// 1 iff `u ≥ 1 − p`.
pub fn bernoulli_threshold(u: f64, p: f64) -> u8 {
    u8::from(u >= 1.0 - p)
}

/// Draws replicate `replicate_index` of the spec using stream
/// `(spec.seed, replicate_index)`.
pub fn sample_dataset(spec: &SimulationSpec, replicate_index: usize) -> Result<Dataset, SimulateError> {
    spec.validate()?;
    let factor = spec.latent_factor()?;
    Ok(sample_with_factor(spec, &factor, replicate_index)?)
}

fn sample_with_factor(
    spec: &SimulationSpec,
    factor: &LowerTriangular,
    replicate_index: usize,
) -> Result<Dataset, TabularError> {
    let z = sample_mvn(
        factor,
        spec.rows,
        RandomStream::new(spec.seed, replicate_index as u64),
    );
    let columns = spec
        .column_names()
        .into_iter()
        .zip(&spec.marginals)
        .zip(&spec.roles)
        .enumerate()
        .map(|(j, ((name, m), role))| {
            let values = z.column(j).iter().map(|&v| m.marginal.transform(v)).collect();
            Column::numeric(name, *role, values)
        })
        .collect();
    Dataset::new(columns)
}

/// All replicates, in index order, generated in parallel.
pub fn generate_replicates(spec: &SimulationSpec) -> Result<Vec<Dataset>, SimulateError> {
    spec.validate()?;
    let factor = spec.latent_factor()?;
    (0..spec.replicates)
        .into_par_iter()
        .map(|r| sample_with_factor(spec, &factor, r).map_err(SimulateError::from))
        .collect()
}

/// Observed correlation target of the fairness experiment, in the order
/// X1, X2, X3, X4, A, B, Y.
pub const REFERENCE_TARGET_CORR: [[f64; 7]; 7] = [
    [1.0, 0.395, -0.018, 0.297, -0.230, 0.350, 0.139],
    [0.395, 1.0, -0.501, 0.103, 0.226, 0.111, 0.209],
    [-0.018, -0.501, 1.0, 0.294, 0.076, 0.294, -0.066],
    [0.297, 0.103, 0.294, 1.0, -0.227, 0.348, -0.208],
    [-0.230, 0.226, 0.076, -0.227, 1.0, 0.043, 0.105],
    [0.350, 0.111, 0.294, 0.348, 0.043, 1.0, 0.039],
    [0.139, 0.209, -0.066, -0.208, 0.105, 0.039, 1.0],
];

/// Four normal features, two Bernoulli sensitive attributes A and B, and a
/// Bernoulli outcome Y, driven by [`REFERENCE_TARGET_CORR`].
pub fn reference_experiment_spec() -> SimulationSpec {
    let normal = |mean, sd| Marginal::Normal { mean, sd };
    SimulationSpec {
        marginals: vec![
            MarginalSpec::named("X1", normal(2.0, 0.6)),
            MarginalSpec::named("X2", normal(0.2, 0.3)),
            MarginalSpec::named("X3", normal(-0.3, 2.0)),
            MarginalSpec::named("X4", normal(0.7, 0.4)),
            MarginalSpec::named("A", Marginal::Bernoulli { p: 0.3 }),
            MarginalSpec::named("B", Marginal::Bernoulli { p: 0.9 }),
            MarginalSpec::named("Y", Marginal::Bernoulli { p: 0.2 }),
        ],
        latent: LatentSpec::TargetCorr(REFERENCE_TARGET_CORR.iter().map(|r| r.to_vec()).collect()),
        roles: vec![
            Role::Feature,
            Role::Feature,
            Role::Feature,
            Role::Feature,
            Role::Sensitive,
            Role::Sensitive,
            Role::Outcome,
        ],
        rows: 100_000,
        replicates: 100,
        seed: 20_230_915,
    }
}
