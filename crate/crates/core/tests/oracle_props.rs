mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shiftinvert::oracle::{dense_gram, gram_spectrum, symmetric_eigen};
use shiftinvert::vector::{dot, norm};

/// Real roots of a symmetric 3×3 characteristic polynomial, trigonometric form.
fn cubic_eigenvalues(m: &[Vec<f64>]) -> [f64; 3] {
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    let p1 = m[0][1].powi(2) + m[0][2].powi(2) + m[1][2].powi(2);
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let bm: Vec<Vec<f64>> = (0..3)
        .map(|i| (0..3).map(|j| (m[i][j] - if i == j { q } else { 0.0 }) / p).collect())
        .collect();
    let det = bm[0][0] * (bm[1][1] * bm[2][2] - bm[1][2] * bm[2][1])
        - bm[0][1] * (bm[1][0] * bm[2][2] - bm[1][2] * bm[2][0])
        + bm[0][2] * (bm[1][0] * bm[2][1] - bm[1][1] * bm[2][0]);
    let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    [e1, 3.0 * q - e1 - e3, e3]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn eigenpair_residuals(seed in any::<u64>(), n in 2usize..60, d in 2usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, n, d, 0.5);
        let g = dense_gram(&a).unwrap();
        let s = gram_spectrum(&a).unwrap();
        prop_assert!(s.values.windows(2).all(|w| w[0] >= w[1]));
        for (l, v) in s.values.iter().zip(&s.vectors) {
            let gv = dense_mul(&g, v);
            let r: Vec<f64> = gv.iter().zip(v.iter()).map(|(x, y)| x - l * y).collect();
            prop_assert!(norm(&r) <= 1e-10 * s.lambda1().max(1e-300));
            prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spectrum_is_similarity_invariant(seed in any::<u64>(), d in 2usize..15) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, d + 3, d, 0.7);
        let g = dense_gram(&a).unwrap();
        // orthogonal Q from a Householder reflector
        let u = random_unit(&mut rng, d);
        let q: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 } - 2.0 * u[i] * u[j]).collect())
            .collect();
        let qg: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| (0..d).map(|k| q[k][i] * g[k][j]).sum()).collect()).collect();
        let qgq: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| (0..d).map(|k| qg[i][k] * q[k][j]).sum()).collect()).collect();
        let s1 = symmetric_eigen(&g).unwrap();
        let s2 = symmetric_eigen(&qgq).unwrap();
        for (x, y) in s1.values.iter().zip(&s2.values) {
            prop_assert!((x - y).abs() <= 1e-10 * s1.lambda1().max(1.0));
        }
    }

    #[test]
    fn matches_cubic_formula(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, 5, 3, 1.0);
        let g = dense_gram(&a).unwrap();
        let s = symmetric_eigen(&g).unwrap();
        let c = cubic_eigenvalues(&g);
        for (x, y) in s.values.iter().zip(c) {
            prop_assert!((x - y).abs() <= 1e-9 * s.lambda1().max(1.0), "{x} vs {y}");
        }
    }
}

#[test]
fn diagonal_input_returns_its_diagonal() {
    let m = vec![vec![3.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 2.0]];
    let s = symmetric_eigen(&m).unwrap();
    assert_eq!(s.values, vec![3.0, 2.0, 1.0]);
    assert_eq!(dot(&s.vectors[0], &[1.0, 0.0, 0.0]), 1.0);
    assert_eq!(dot(&s.vectors[1], &[0.0, 0.0, 1.0]), 1.0);
}
