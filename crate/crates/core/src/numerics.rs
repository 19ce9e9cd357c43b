//! Scalar and small-matrix primitives shared by every pipeline stage.
//!
//! Everything here is deterministic: the standard normal functions are pure,
//! and random draws come from [`RandomStream`] descriptors that hand out fresh
//! generators instead of mutating shared state.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("matrix is not symmetric: |m[{i}][{j}] - m[{j}][{i}]| = {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),
}

const SYMMETRY_TOL: f64 = 1e-12;

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF without input validation; NaN propagates.
pub(crate) fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal CDF. Rejects NaN and infinite inputs.
pub fn std_normal_cdf(x: f64) -> Result<f64, NumericsError> {
    if !x.is_finite() {
        return Err(NumericsError::Domain(format!("std_normal_cdf of {x}")));
    }
    Ok(phi(x))
}

/// Upper-tail probability `1 - Φ(x)` computed without cancellation.
pub(crate) fn phi_upper(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Inverse of the standard normal CDF for `p` in the open unit interval.
pub fn std_normal_quantile(p: f64) -> Result<f64, NumericsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(NumericsError::Domain(format!(
            "std_normal_quantile needs 0 < p < 1, got {p}"
        )));
    }
    Ok(quantile_unchecked(p))
}

pub(crate) fn quantile_unchecked(p: f64) -> f64 {
    if p > 0.5 {
        return -lower_tail_quantile(1.0 - p);
    }
    lower_tail_quantile(p)
}

fn lower_tail_quantile(p: f64) -> f64 {
    let x = wichura_as241(p);
    // One Newton step on Φ(x) - p.
    let density = std_normal_pdf(x);
    if density > 0.0 {
        x - (phi(x) - p) / density
    } else {
        x
    }
}

/// Wichura's AS241 (PPND16) rational approximation, ~1e-16 relative.
fn wichura_as241(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q
            * (((((((2_509.080_928_730_122_7 * r + 33_430.575_583_588_128) * r
                + 67_265.770_927_008_7)
                * r
                + 45_921.953_931_549_87)
                * r
                + 13_731.693_765_509_461)
                * r
                + 1_971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((5_226.495_278_852_545 * r + 28_729.085_735_721_943) * r
                + 39_307.895_800_092_71)
                * r
                + 21_213.794_301_586_597)
                * r
                + 5_394.196_021_424_751)
                * r
                + 687.187_007_492_057_9)
                * r
                + 42.313_330_701_600_91)
                * r
                + 1.0);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let value = if r <= 5.0 {
        r -= 1.6;
        (((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
                + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_08)
                * r
                + 0.689_767_334_985_1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_759)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103)
            / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_133e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_8)
                * r
                + 0.599_832_206_555_888)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

/// Descriptor of a reproducible random sequence.
///
/// A `(seed, stream_index)` pair always yields the same draws; distinct
/// stream indices map to distinct ChaCha streams of the same key, so
/// replicate `r` can be generated independently of every other replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStream {
    pub seed: u64,
    pub stream_index: u64,
}

impl RandomStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        Self { seed, stream_index }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// A stream for a different purpose (splitting, bootstrap batches, ...)
    /// that stays tied to this stream's index.
    pub fn derive(&self, purpose: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(purpose.wrapping_add(0x5EED))),
            stream_index: self.stream_index,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Lower-triangular factor stored packed, row by row, diagonal included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerTriangular {
    dim: usize,
    entries: Vec<f64>,
}

impl LowerTriangular {
    /// Builds from packed row-major entries: row `i` contributes `i + 1` values.
    pub fn from_packed(dim: usize, entries: Vec<f64>) -> Result<Self, NumericsError> {
        if dim == 0 || entries.len() != dim * (dim + 1) / 2 {
            return Err(NumericsError::Shape(format!(
                "packed lower triangle of dim {dim} needs {} entries, got {}",
                dim * (dim + 1) / 2,
                entries.len()
            )));
        }
        let factor = Self { dim, entries };
        for i in 0..dim {
            if !(factor.get(i, i) >= 0.0) {
                return Err(NumericsError::Domain(format!(
                    "negative diagonal entry at row {i}"
                )));
            }
        }
        Ok(factor)
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * (dim + 1) / 2];
        for i in 0..dim {
            entries[i * (i + 1) / 2 + i] = 1.0;
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.entries[i * (i + 1) / 2 + j]
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.entries[start..start + i + 1]
    }

    pub fn to_dense(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.dim, self.dim), |(i, j)| self.get(i, j))
    }

    /// `L · Lᵀ`.
    pub fn gram(&self) -> Array2<f64> {
        let n = self.dim;
        let mut out = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .map(|(a, b)| a * b)
                    .sum();
                out[[i, j]] = v;
                out[[j, i]] = v;
            }
        }
        out
    }

    /// Solves `L y = b` by forward substitution.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        for i in 0..self.dim {
            let row = self.row(i);
            let partial: f64 = row[..i].iter().zip(&y[..i]).map(|(l, v)| l * v).sum();
            y[i] = (b[i] - partial) / row[i];
        }
        y
    }

    /// Solves `Lᵀ x = y` by back substitution.
    pub fn solve_upper(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = y[i];
            for (k, xk) in x.iter().enumerate().skip(i + 1) {
                acc -= self.get(k, i) * xk;
            }
            x[i] = acc / self.get(i, i);
        }
        x
    }

    /// Solves `L Lᵀ x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }
}

/// Cholesky factorization of a symmetric positive-definite matrix.
///
/// Failure of the factorization is the positive-definiteness test: any
/// non-positive pivot yields [`NumericsError::NotPositiveDefinite`].
pub fn cholesky_factor(matrix: &Array2<f64>) -> Result<LowerTriangular, NumericsError> {
    let (n, m) = matrix.dim();
    if n != m || n == 0 {
        return Err(NumericsError::Shape(format!(
            "cholesky needs a non-empty square matrix, got {n}x{m}"
        )));
    }
    for i in 0..n {
        for j in 0..i {
            let gap = (matrix[[i, j]] - matrix[[j, i]]).abs();
            let scale = (matrix[[i, i]] * matrix[[j, j]]).abs().sqrt().max(1.0);
            if !(gap <= SYMMETRY_TOL * scale) {
                return Err(NumericsError::NotSymmetric { i, j, gap });
            }
        }
    }
    let mut entries = vec![0.0; n * (n + 1) / 2];
    for i in 0..n {
        let row_i = i * (i + 1) / 2;
        for j in 0..=i {
            let row_j = j * (j + 1) / 2;
            let mut sum = matrix[[i, j]];
            for k in 0..j {
                sum -= entries[row_i + k] * entries[row_j + k];
            }
            if i == j {
                if !(sum > 0.0) {
                    return Err(NumericsError::NotPositiveDefinite { row: i, pivot: sum });
                }
                entries[row_i + i] = sum.sqrt();
            } else {
                entries[row_i + j] = sum / entries[row_j + j];
            }
        }
    }
    Ok(LowerTriangular { dim: n, entries })
}

/// Pearson's linear correlation coefficient.
pub fn pearson_corr(x: &[f64], y: &[f64]) -> Result<f64, NumericsError> {
    if x.len() != y.len() {
        return Err(NumericsError::Shape(format!(
            "pearson_corr length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(NumericsError::Shape(
            "pearson_corr needs at least two observations".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(NumericsError::DegenerateVariance(
            "pearson_corr input has zero variance".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Draws `n` rows of `L·ε` with ε i.i.d. standard normal.
pub fn sample_mvn(factor: &LowerTriangular, n: usize, stream: RandomStream) -> Array2<f64> {
    let dim = factor.dim();
    let mut rng = stream.rng();
    let mut out = Array2::zeros((n, dim));
    let mut eps = vec![0.0; dim];
    for mut row in out.rows_mut() {
        for e in eps.iter_mut() {
            *e = StandardNormal.sample(&mut rng);
        }
        for i in 0..dim {
            row[i] = factor
                .row(i)
                .iter()
                .zip(&eps)
                .map(|(l, e)| l * e)
                .sum::<f64>();
        }
    }
    out
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues (ascending) and the matching eigenvectors as columns.
pub fn symmetric_eigen(matrix: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>), NumericsError> {
    let (n, m) = matrix.dim();
    if n != m {
        return Err(NumericsError::Shape(format!(
            "symmetric_eigen needs a square matrix, got {n}x{m}"
        )));
    }
    let mut a = matrix.clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum();
        let scale: f64 = a.iter().map(|x| x * x).sum();
        if off <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].total_cmp(&a[[j, j]]));
    let values = order.iter().map(|&i| a[[i, i]]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| v[[r, order[c]]]);
    Ok((values, vectors))
}

/// Moore–Penrose pseudo-inverse of a symmetric positive semi-definite matrix.
///
/// Eigenvalues below `rel_tol · λ_max` are treated as zero. Returns the
/// inverse together with the numerical rank.
pub fn psd_pseudo_inverse(
    matrix: &Array2<f64>,
    rel_tol: f64,
) -> Result<(Array2<f64>, usize), NumericsError> {
    let n = matrix.nrows();
    let (values, vectors) = symmetric_eigen(matrix)?;
    let max = values.iter().cloned().fold(0.0_f64, f64::max);
    let mut inv = Array2::zeros((n, n));
    let mut rank = 0;
    for (k, &lambda) in values.iter().enumerate() {
        if max <= 0.0 || lambda <= rel_tol * max {
            continue;
        }
        rank += 1;
        for i in 0..n {
            for j in 0..n {
                inv[[i, j]] += vectors[[i, k]] * vectors[[j, k]] / lambda;
            }
        }
    }
    Ok((inv, rank))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    /// Composite Simpson integral of the density from 0 to x, added to 0.5.
    fn cdf_by_quadrature(x: f64) -> f64 {
        let steps = 20_000;
        let h = x / steps as f64;
        let mut acc = std_normal_pdf(0.0) + std_normal_pdf(x);
        for k in 1..steps {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * std_normal_pdf(k as f64 * h);
        }
        0.5 + acc * h / 3.0
    }

    #[test]
    fn cdf_reference_points() {
        assert_eq!(std_normal_cdf(0.0).unwrap(), 0.5);
        assert_abs_diff_eq!(std_normal_cdf(1.96).unwrap(), 0.975, epsilon = 1e-4);
        let oracle = cdf_by_quadrature(-0.8416);
        assert_abs_diff_eq!(oracle, 0.2000, epsilon = 1e-4);
        assert_abs_diff_eq!(std_normal_cdf(-0.8416).unwrap(), oracle, epsilon = 1e-12);
    }

    #[test]
    fn cdf_matches_quadrature_on_grid() {
        for k in -40..=40 {
            let x = k as f64 * 0.15;
            assert_abs_diff_eq!(std_normal_cdf(x).unwrap(), cdf_by_quadrature(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn cdf_rejects_non_finite() {
        assert!(matches!(std_normal_cdf(f64::NAN), Err(NumericsError::Domain(_))));
        assert!(std_normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn quantile_reference_points() {
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(std_normal_quantile(0.2).unwrap(), -0.842, epsilon = 1e-3);
        assert_abs_diff_eq!(std_normal_quantile(0.975).unwrap(), 1.959_963_984_540_054, epsilon = 1e-12);
    }

    #[test]
    fn quantile_domain() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(std_normal_quantile(p).is_err(), "p = {p}");
        }
    }

    #[test]
    fn quantile_cdf_round_trip_on_grid() {
        let mut x = -6.0;
        while x <= 6.0 + 1e-12 {
            let back = std_normal_quantile(std_normal_cdf(x).unwrap()).unwrap();
            assert!((back - x).abs() <= 1e-8, "x = {x}, back = {back}");
            x += 0.01;
        }
    }

    #[test]
    fn quantile_inverts_cdf_in_probability() {
        let probes = [1e-12, 1e-9, 1e-5, 0.01, 0.2, 0.5, 0.77, 0.99, 1.0 - 1e-9, 1.0 - 1e-12];
        for &p in &probes {
            let x = std_normal_quantile(p).unwrap();
            assert!((phi(x) - p).abs() <= 1e-9 * p.max(1e-3), "p = {p}");
        }
    }

    #[test]
    fn cholesky_examples() {
        let id = Array2::<f64>::eye(3);
        assert_eq!(cholesky_factor(&id).unwrap().to_dense(), id);

        let l = cholesky_factor(&array![[1.0, 0.6], [0.6, 1.0]]).unwrap();
        assert_abs_diff_eq!(l.get(0, 0), 1.0);
        assert_abs_diff_eq!(l.get(1, 0), 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(l.get(1, 1), 0.8, epsilon = 1e-15);
        assert_eq!(l.get(0, 1), 0.0);

        assert!(matches!(
            cholesky_factor(&array![[1.0, 1.2], [1.2, 1.0]]),
            Err(NumericsError::NotPositiveDefinite { .. })
        ));
        assert!(matches!(
            cholesky_factor(&array![[1.0, 0.5], [0.4, 1.0]]),
            Err(NumericsError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn cholesky_reconstructs() {
        let m = array![[4.0, 1.0, 0.5], [1.0, 3.0, -0.2], [0.5, -0.2, 2.0]];
        let l = cholesky_factor(&m).unwrap();
        let back = l.gram();
        for (a, b) in back.iter().zip(m.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        let x = l.solve(&[1.0, 2.0, 3.0]);
        let mx: Vec<f64> = m.rows().into_iter().map(|r| r.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();
        for (a, b) in mx.iter().zip([1.0, 2.0, 3.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.5];
        assert_abs_diff_eq!(pearson_corr(&x, &x).unwrap(), 1.0, epsilon = 1e-15);
        let y: Vec<f64> = x.iter().map(|v| -3.0 * v + 7.0).collect();
        assert_abs_diff_eq!(pearson_corr(&x, &y).unwrap(), -1.0, epsilon = 1e-15);
        // cov = 2/3, sd_x = sqrt(2/3), sd_y = sqrt(8/9) -> 0.8660
        assert_abs_diff_eq!(pearson_corr(&[1.0, 2.0, 3.0], &[2.0, 2.0, 4.0]).unwrap(), 0.866, epsilon = 1e-3);
        assert!(matches!(
            pearson_corr(&[1.0, 1.0], &[0.0, 2.0]),
            Err(NumericsError::DegenerateVariance(_))
        ));
        assert!(pearson_corr(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn mvn_is_deterministic_and_centered() {
        let stream = RandomStream::new(42, 3);
        let l = LowerTriangular::identity(1);
        let n = 100_000;
        let a = sample_mvn(&l, n, stream);
        let b = sample_mvn(&l, n, stream);
        assert_eq!(a, b);
        let mean = a.column(0).sum() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        let other = sample_mvn(&l, 10, RandomStream::new(42, 4));
        assert_ne!(a.slice(ndarray::s![..10, ..]), other);
    }

    #[test]
    fn mvn_reproduces_target_correlation() {
        let l = cholesky_factor(&array![[1.0, 0.6], [0.6, 1.0]]).unwrap();
        let z = sample_mvn(&l, 100_000, RandomStream::new(7, 0));
        let c0 = z.column(0).to_vec();
        let c1 = z.column(1).to_vec();
        assert_abs_diff_eq!(pearson_corr(&c0, &c1).unwrap(), 0.6, epsilon = 0.01);
    }

    #[test]
    fn jacobi_eigen_diagonalizes() {
        let m = array![[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]];
        let (values, vectors) = symmetric_eigen(&m).unwrap();
        let expected = [2.0 - 2f64.sqrt(), 2.0, 2.0 + 2f64.sqrt()];
        for (v, e) in values.iter().zip(expected) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-12);
        }
        let recon = vectors.dot(&Array2::from_diag(&ndarray::Array1::from(values))).dot(&vectors.t());
        for (a, b) in recon.iter().zip(m.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn pseudo_inverse_drops_null_space() {
        let m = array![[1.0, 1.0], [1.0, 1.0]];
        let (inv, rank) = psd_pseudo_inverse(&m, 1e-10).unwrap();
        assert_eq!(rank, 1);
        for v in inv.iter() {
            assert_abs_diff_eq!(*v, 0.25, epsilon = 1e-12);
        }
    }
}
