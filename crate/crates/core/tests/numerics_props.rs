use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use orthofair::numerics::{
    cholesky_factor, pearson_corr, sample_mvn, std_normal_cdf, std_normal_quantile, LowerTriangular, RandomStream,
};
use proptest::prelude::*;

fn two_pass_corr(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy / (sxx.sqrt() * syy.sqrt())
}

fn symmetric(dim: usize, entries: &[f64], diag: f64) -> Array2<f64> {
    let mut m = Array2::from_elem((dim, dim), 0.0);
    let mut it = entries.iter();
    for i in 0..dim {
        m[[i, i]] = diag;
        for j in 0..i {
            let v = *it.next().unwrap();
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
    m
}

proptest! {
    #[test]
    fn quantile_then_cdf_recovers_probability(p in 1e-12f64..(1.0 - 1e-12)) {
        let z = std_normal_quantile(p).unwrap();
        prop_assert!((std_normal_cdf(z).unwrap() - p).abs() <= 1e-8);
    }

    #[test]
    fn tiny_tail_probabilities_round_trip_relatively(log10_p in -12.0f64..-3.0) {
        let p = 10f64.powf(log10_p);
        let z = std_normal_quantile(p).unwrap();
        prop_assert!((std_normal_cdf(z).unwrap() - p).abs() <= 1e-8 * p);
    }

    #[test]
    fn cholesky_agrees_with_eigenvalue_oracle(
        dim in 2usize..=4,
        entries in prop::collection::vec(-1.0f64..1.0, 6),
        diag in 0.2f64..1.5,
    ) {
        let m = symmetric(dim, &entries, diag);
        let min_eig = SymmetricEigen::new(DMatrix::from_fn(dim, dim, |i, j| m[[i, j]])).eigenvalues.min();
        prop_assume!(min_eig.abs() > 1e-9);
        prop_assert_eq!(cholesky_factor(&m).is_ok(), min_eig > 0.0);
    }

    #[test]
    fn pearson_matches_two_pass_oracle(
        pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..60),
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let spread = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
        prop_assume!(spread(&x) > 1e-3 && spread(&y) > 1e-3);
        let got = pearson_corr(&x, &y).unwrap();
        prop_assert!((got - two_pass_corr(&x, &y)).abs() <= 1e-12);
    }
}

#[test]
fn identity_factor_gives_uncorrelated_columns() {
    let n = 20_000;
    let z = sample_mvn(&LowerTriangular::identity(4), n, RandomStream::new(5, 0));
    let bound = 4.0 / (n as f64).sqrt();
    for i in 0..4 {
        for j in 0..i {
            let r = pearson_corr(&z.column(i).to_vec(), &z.column(j).to_vec()).unwrap();
            assert!(r.abs() <= bound, "corr({i},{j}) = {r}");
        }
    }
}

#[test]
fn cholesky_factor_reproduces_matrix() {
    let m = symmetric(3, &[0.3, -0.2, 0.4], 1.0);
    let l = cholesky_factor(&m).unwrap();
    let back = l.gram();
    for i in 0..3 {
        for j in 0..3 {
            assert!((back[[i, j]] - m[[i, j]]).abs() < 1e-14);
        }
    }
}

#[test]
fn streams_are_reproducible_and_distinct() {
    let f = LowerTriangular::identity(2);
    let a = sample_mvn(&f, 100, RandomStream::new(1, 3));
    let b = sample_mvn(&f, 100, RandomStream::new(1, 3));
    let c = sample_mvn(&f, 100, RandomStream::new(1, 4));
    assert_eq!(a, b);
    assert_ne!(a, c);
}
