use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use orthofair::decorrelate::{apply_transition, fit_transition, gram_schmidt, DecorrelateError};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `rows × (features + sensitive)` data with sensitive columns last. The
/// first sensitive column is binary, the rest continuous; features load on
/// the sensitive columns so there is something to remove.
fn correlated_data(seed: u64, rows: usize, features: usize, sensitive: usize) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = features + sensitive;
    let mut x = Array2::zeros((rows, dim));
    let loadings: Vec<Vec<f64>> = (0..features)
        .map(|_| (0..sensitive).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    for i in 0..rows {
        for s in 0..sensitive {
            x[[i, features + s]] = if s == 0 {
                f64::from(u8::from(rng.random_bool(0.35)))
            } else {
                rng.random_range(-3.0..3.0)
            };
        }
        for k in 0..features {
            let shared: f64 = (0..sensitive).map(|s| loadings[k][s] * x[[i, features + s]]).sum();
            x[[i, k]] = 5.0 * k as f64 + shared + rng.random_range(-1.0..1.0);
        }
    }
    x
}

fn cov(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n
}

fn var(a: &[f64]) -> f64 {
    cov(a, a)
}

fn column(x: &Array2<f64>, j: usize) -> Vec<f64> {
    x.column(j).to_vec()
}

/// Least-squares slopes of `target` on the centered sensitive columns, by
/// the normal equations.
fn normal_equation_slopes(x: &Array2<f64>, sensitive: &[usize], target: &[f64]) -> Vec<f64> {
    let n = x.nrows();
    let centered: Vec<Vec<f64>> = sensitive
        .iter()
        .map(|&j| {
            let c = column(x, j);
            let m = c.iter().sum::<f64>() / n as f64;
            c.into_iter().map(|v| v - m).collect()
        })
        .collect();
    let s = sensitive.len();
    let gram = DMatrix::from_fn(s, s, |a, b| centered[a].iter().zip(&centered[b]).map(|(p, q)| p * q).sum());
    let rhs = DVector::from_fn(s, |a, _| centered[a].iter().zip(target).map(|(p, q)| p * q).sum());
    gram.lu().solve(&rhs).expect("full-rank sensitive block").iter().copied().collect()
}

fn data_strategy() -> impl Strategy<Value = (Array2<f64>, Vec<usize>)> {
    (any::<u64>(), 40usize..300, 1usize..5, 1usize..4).prop_map(|(seed, rows, f, s)| {
        (correlated_data(seed, rows, f, s), (f..f + s).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transformed_features_are_orthogonal_to_sensitive((x, sens) in data_strategy()) {
        let t = fit_transition(&x, &sens).unwrap();
        let out = apply_transition(&t, &x).unwrap();
        for k in (0..x.ncols()).filter(|k| !sens.contains(k)) {
            let v = column(&out, k);
            for &j in &sens {
                let s = column(&x, j);
                let r = cov(&v, &s) / (var(&v).sqrt() * var(&s).sqrt());
                prop_assert!(r.abs() < 1e-8, "corr({k},{j}) = {r}");
            }
        }
    }

    #[test]
    fn diagonal_is_exactly_one_and_sensitive_rows_are_unit((x, sens) in data_strategy()) {
        let t = fit_transition(&x, &sens).unwrap();
        for k in 0..x.ncols() {
            prop_assert_eq!(t.rows[k][k], 1.0);
            for j in 0..x.ncols() {
                if j != k && (sens.contains(&k) || !sens.contains(&j)) {
                    prop_assert_eq!(t.rows[k][j], 0.0);
                }
            }
        }
    }

    #[test]
    fn refitting_on_transformed_data_gives_identity((x, sens) in data_strategy()) {
        let t = fit_transition(&x, &sens).unwrap();
        let out = apply_transition(&t, &x).unwrap();
        let again = fit_transition(&out, &sens).unwrap();
        prop_assert!(again.distance_from_identity() < 1e-8);
    }

    #[test]
    fn matches_residualization_oracle((x, sens) in data_strategy()) {
        let t = fit_transition(&x, &sens).unwrap();
        let out = apply_transition(&t, &x).unwrap();
        let n = x.nrows();
        for k in (0..x.ncols()).filter(|k| !sens.contains(k)) {
            let u = column(&x, k);
            let beta = normal_equation_slopes(&x, &sens, &u);
            for (c, &j) in sens.iter().enumerate() {
                prop_assert!((t.rows[k][j] + beta[c]).abs() <= 1e-8 * (1.0 + beta[c].abs()));
            }
            let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
            let means: Vec<f64> = sens.iter().map(|&j| mean(&column(&x, j))).collect();
            let u_mean = mean(&u);
            let v = column(&out, k);
            let v_mean = mean(&v);
            for i in 0..n {
                let fitted: f64 = sens.iter().enumerate().map(|(c, &j)| beta[c] * (x[[i, j]] - means[c])).sum();
                let residual = u[i] - u_mean - fitted;
                prop_assert!((v[i] - v_mean - residual).abs() <= 1e-8 * (1.0 + u[i].abs()));
            }
        }
    }
}

/// Among all `v_k = u_k + Σ_{j≠k} a_kj x_j` orthogonal to the sensitive
/// columns, the fitted one has the smallest `Var(u_k − v_k)`.
#[test]
fn fitted_rows_minimize_distortion() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for trial in 0..20 {
        let (f, s) = (3, 2);
        let x = correlated_data(1000 + trial, 200, f, s);
        let sens: Vec<usize> = (f..f + s).collect();
        let t = fit_transition(&x, &sens).unwrap();
        for k in 0..f {
            let best = {
                let v: Vec<f64> = (0..x.nrows())
                    .map(|i| (0..f + s).map(|j| t.rows[k][j] * x[[i, j]]).sum())
                    .collect();
                let diff: Vec<f64> = column(&x, k).iter().zip(&v).map(|(a, b)| a - b).collect();
                var(&diff)
            };
            for _ in 0..10 {
                let others: Vec<usize> = (0..f).filter(|&j| j != k).collect();
                let eps: Vec<f64> = others.iter().map(|_| 1e-3 * rng.random_range(-1.0..1.0)).collect();
                let base: Vec<f64> = (0..x.nrows())
                    .map(|i| x[[i, k]] + others.iter().zip(&eps).map(|(&j, e)| e * x[[i, j]]).sum::<f64>())
                    .collect();
                let beta = normal_equation_slopes(&x, &sens, &base);
                let v: Vec<f64> = (0..x.nrows())
                    .map(|i| base[i] - sens.iter().enumerate().map(|(c, &j)| beta[c] * x[[i, j]]).sum::<f64>())
                    .collect();
                for &j in &sens {
                    assert!(cov(&v, &column(&x, j)).abs() < 1e-8);
                }
                let diff: Vec<f64> = column(&x, k).iter().zip(&v).map(|(a, b)| a - b).collect();
                assert!(var(&diff) > best, "perturbation reduced distortion for column {k}");
            }
        }
    }
}

#[test]
fn rank_deficient_sensitive_block_still_orthogonalizes() {
    let mut x = correlated_data(5, 150, 2, 2);
    for i in 0..x.nrows() {
        x[[i, 3]] = 1.0 - x[[i, 2]];
    }
    let t = fit_transition(&x, &[2, 3]).unwrap();
    assert_eq!(t.sensitive_rank, 1);
    assert!(!t.warnings.is_empty());
    let out = apply_transition(&t, &x).unwrap();
    for k in 0..2 {
        assert!(cov(&column(&out, k), &column(&x, 2)).abs() < 1e-8);
    }
}

#[test]
fn gram_schmidt_gives_covariance_orthogonal_vectors() {
    let x = correlated_data(9, 120, 3, 1);
    let vectors: Vec<Vec<f64>> = (0..4).map(|j| column(&x, j)).collect();
    let out = gram_schmidt(&vectors).unwrap();
    for a in 0..out.len() {
        for b in 0..a {
            assert!(cov(&out[a], &out[b]).abs() < 1e-8 * var(&out[a]).sqrt() * var(&out[b]).sqrt());
        }
    }
    let dependent = vec![vectors[0].clone(), vectors[0].iter().map(|v| 2.0 * v + 1.0).collect()];
    assert!(matches!(gram_schmidt(&dependent), Err(DecorrelateError::RankDeficient { .. })));
}
