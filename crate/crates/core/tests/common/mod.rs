#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use shiftinvert::oracle::{gram_spectrum, Spectrum};
use shiftinvert::vector::{dot, gaussian_vector, norm};
use shiftinvert::CsrMatrix;

pub fn diag(entries: &[f64]) -> CsrMatrix<f64> {
    let t: Vec<_> = entries.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
    CsrMatrix::from_triplets(entries.len(), entries.len(), &t).unwrap()
}

/// `diag(1, 1/√2)`: `λ₁ = 1`, `gap = 1/2`, `‖A‖_F² = 3/2`.
pub fn reference() -> CsrMatrix<f64> {
    diag(&[1.0, 0.5f64.sqrt()])
}

/// Gaussian entries kept with probability `density`; never all zero.
pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize, density: f64) -> CsrMatrix<f64> {
    loop {
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..d {
                if rng.random::<f64>() < density {
                    let v: f64 = gaussian_vector(1, rng)[0];
                    t.push((i, j, v));
                }
            }
        }
        if !t.is_empty() {
            return CsrMatrix::from_triplets(n, d, &t).unwrap();
        }
    }
}

/// Random instance with a visible gap, plus its spectrum.
pub fn gapped_instance(rng: &mut ChaCha8Rng, n_max: usize, d_max: usize, min_gap: f64) -> (CsrMatrix<f64>, Spectrum<f64>) {
    loop {
        let d = rng.random_range(2..=d_max);
        let n = rng.random_range(d..=n_max.max(d));
        let density = rng.random_range(0.3..1.0);
        let a = random_matrix(rng, n, d, density);
        let s = gram_spectrum(&a).unwrap();
        if s.gap() >= min_gap {
            return (a, s);
        }
    }
}

/// `λ = λ₁(1 + u·gap)` with `u` uniform in `(1/150, 1/100]`.
pub fn band_shift(rng: &mut ChaCha8Rng, s: &Spectrum<f64>) -> f64 {
    let u = rng.random_range(1.0 / 150.0..1.0 / 100.0);
    s.lambda1() * (1.0 + u * s.gap())
}

pub fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = gaussian_vector(d, rng);
    let n = norm(&v);
    v.iter().map(|x| x / n).collect()
}

/// `cos θ·v₁ + sin θ·w` with `w ⟂ v₁` random and `sin²θ = s2`.
pub fn tilted_unit(rng: &mut ChaCha8Rng, v1: &[f64], s2: f64) -> Vec<f64> {
    let d = v1.len();
    let mut w = random_unit(rng, d);
    let c = dot(&w, v1);
    for (wi, &vi) in w.iter_mut().zip(v1) {
        *wi -= c * vi;
    }
    let n = norm(&w);
    let (s, c) = (s2.sqrt(), (1.0 - s2).sqrt());
    v1.iter().zip(&w).map(|(&v, &wi)| c * v + s * wi / n).collect()
}

pub fn dense_mul(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, x)).collect()
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
