//! Property suites for the norm and measure layer, checked against the
//! limit-definition oracle and an independent eigenvalue routine.

use mucert::linalg::{default_eps_ladder, mu_limit_oracle, BaseNorm, Norm, SquareMatrix};
use proptest::prelude::*;

fn matrix_strategy(max_dim: usize) -> impl Strategy<Value = SquareMatrix> {
    (1..=max_dim).prop_flat_map(|n| {
        proptest::collection::vec(-5.0..5.0f64, n * n)
            .prop_map(move |data| SquareMatrix::new(n, data).unwrap())
    })
}

fn matrix_pair_strategy(max_dim: usize) -> impl Strategy<Value = (SquareMatrix, SquareMatrix)> {
    (1..=max_dim).prop_flat_map(|n| {
        (
            proptest::collection::vec(-5.0..5.0f64, n * n),
            proptest::collection::vec(-5.0..5.0f64, n * n),
        )
            .prop_map(move |(a, b)| {
                (
                    SquareMatrix::new(n, a).unwrap(),
                    SquareMatrix::new(n, b).unwrap(),
                )
            })
    })
}

/// Well-conditioned random diagonal scaling for the matrix dimension.
fn scaling_for(a: &SquareMatrix, seed: &[f64]) -> SquareMatrix {
    let n = a.dim();
    let diag: Vec<f64> = (0..n).map(|i| 0.5 + 1.5 * seed[i % seed.len()]).collect();
    SquareMatrix::diagonal(&diag)
}

proptest! {
    #[test]
    fn measure_agrees_with_limit_oracle(a in matrix_strategy(8),
                                        seed in proptest::collection::vec(0.0..1.0f64, 8)) {
        let ladder = default_eps_ladder();
        for base in [BaseNorm::L1, BaseNorm::LInf] {
            let norm = match base {
                BaseNorm::L1 => Norm::l1(),
                BaseNorm::LInf => Norm::linf(),
            };
            let mu = norm.measure(&a).unwrap();
            let oracle = mu_limit_oracle(&norm, &a, &ladder).unwrap();
            prop_assert!((mu - oracle).abs() <= 1e-6, "{base:?}: {mu} vs {oracle}");

            let scaled = Norm::scaled(base, scaling_for(&a, &seed)).unwrap();
            let mu = scaled.measure(&a).unwrap();
            let oracle = mu_limit_oracle(&scaled, &a, &ladder).unwrap();
            prop_assert!((mu - oracle).abs() <= 1e-6, "scaled {base:?}: {mu} vs {oracle}");
        }
    }

    #[test]
    fn measure_dominates_spectral_abscissa(a in matrix_strategy(8)) {
        let n = a.dim();
        let na = nalgebra::DMatrix::<f64>::from_fn(n, n, |i, j| a.get(i, j));
        let alpha = na
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        for norm in [Norm::l1(), Norm::linf()] {
            let mu = norm.measure(&a).unwrap();
            prop_assert!(mu >= alpha - 1e-8, "mu = {mu} < alpha = {alpha}");
        }
    }

    #[test]
    fn measure_translation_property(a in matrix_strategy(8), c in -3.0..3.0f64) {
        for norm in [Norm::l1(), Norm::linf()] {
            let mu = norm.measure(&a).unwrap();
            let mu_shifted = norm.measure(&a.shift_diagonal(c)).unwrap();
            prop_assert!((mu_shifted - (mu + c)).abs() <= 1e-12);
        }
    }

    #[test]
    fn measure_subadditive_and_homogeneous((a, b) in matrix_pair_strategy(6),
                                           alpha in 0.0..4.0f64) {
        for norm in [Norm::l1(), Norm::linf()] {
            let mu_a = norm.measure(&a).unwrap();
            let mu_b = norm.measure(&b).unwrap();
            let mu_sum = norm.measure(&a.add(&b)).unwrap();
            prop_assert!(mu_sum <= mu_a + mu_b + 1e-10);

            let mu_scaled = norm.measure(&a.scale(alpha)).unwrap();
            prop_assert!((mu_scaled - alpha * mu_a).abs() <= 1e-10 * (1.0 + alpha));
        }
    }

    #[test]
    fn scaled_measure_is_similarity_measure(a in matrix_strategy(6),
                                            seed in proptest::collection::vec(0.0..1.0f64, 8)) {
        let p = scaling_for(&a, &seed);
        for base in [BaseNorm::L1, BaseNorm::LInf] {
            let plain = match base {
                BaseNorm::L1 => Norm::l1(),
                BaseNorm::LInf => Norm::linf(),
            };
            let scaled = Norm::scaled(base, p.clone()).unwrap();
            let direct = scaled.measure(&a).unwrap();
            let similar = plain
                .measure(&p.mul(&a).mul(&p.inverse().unwrap()))
                .unwrap();
            prop_assert!((direct - similar).abs() <= 1e-10);
        }
    }

    #[test]
    fn vector_norm_axioms(v in proptest::collection::vec(-10.0..10.0f64, 1..8)) {
        for norm in [Norm::l1(), Norm::linf()] {
            let value = norm.vector_norm(&v).unwrap();
            prop_assert!(value >= 0.0);
            let zero = vec![0.0; v.len()];
            prop_assert_eq!(norm.vector_norm(&zero).unwrap(), 0.0);
            if v.iter().any(|x| x.abs() > 0.0) {
                prop_assert!(value > 0.0);
            }
            // triangle inequality against itself doubled
            let doubled: Vec<f64> = v.iter().map(|x| 2.0 * x).collect();
            let d = norm.vector_norm(&doubled).unwrap();
            prop_assert!((d - 2.0 * value).abs() <= 1e-12 * (1.0 + d));
        }
    }
}
