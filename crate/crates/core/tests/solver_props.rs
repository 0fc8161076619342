mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shiftinvert::accel::{regularized_component_gradient, regularized_params, AccelConfig};
use shiftinvert::oracle::exact_shifted_solve;
use shiftinvert::svrg::EpochParams;
use shiftinvert::vector::{norm_sq, sub};
use shiftinvert::*;

/// `Σᵢ(1/pᵢ)‖gᵢ(x) − gᵢ(x*)‖²` over rows with `pᵢ > 0`.
fn weighted_variance<F>(a: &CsrMatrix<f64>, mut grad: F, x: &[f64], x_star: &[f64]) -> f64
where
    F: FnMut(usize, &[f64]) -> Vector<f64>,
{
    let p = build_sampling_distribution(a).unwrap();
    (0..a.n())
        .filter(|&i| p.probability(i) > 0.0)
        .map(|i| norm_sq(&sub(&grad(i, x), &grad(i, x_star))) / p.probability(i))
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn improved_variance_bound(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, s) = gapped_instance(&mut rng, 200, 50, 0.01);
        let lambda = band_shift(&mut rng, &s);
        let op = ShiftedOperator::new(&a, lambda).unwrap();
        let d = a.d();
        let b = random_unit(&mut rng, d);
        let x_star = exact_shifted_solve(&op, &b).unwrap();
        let coef = 4.0 * s.lambda1() * a.frob_sq() / (lambda - s.lambda1());
        for _ in 0..5 {
            let dir = random_unit(&mut rng, d);
            let x: Vec<f64> = x_star.iter().zip(&dir).map(|(u, v)| u + v).collect();
            let lhs = weighted_variance(&a, |i, y| component_gradient(&a, lambda, i, y, &b).unwrap(), &x, &x_star);
            let gap = 0.5 * op.b_norm(&sub(&x, &x_star)).unwrap().powi(2);
            prop_assert!(lhs <= coef * gap + 1e-9, "{lhs} > {}", coef * gap);
        }
    }

    #[test]
    fn regularized_variance_bound(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, s) = gapped_instance(&mut rng, 100, 30, 0.01);
        let lambda = band_shift(&mut rng, &s);
        let mu = lambda - s.lambda1();
        let gamma = 2.0 * mu + (accel::default_gamma(&a, s.lambda1()) - 2.0 * mu).max(0.0) * 0.5;
        let d = a.d();
        let b = random_unit(&mut rng, d);
        let anchor = random_unit(&mut rng, d);
        let reg = ShiftedOperator::new(&a, lambda + gamma).unwrap();
        let rhs: Vec<f64> = b.iter().zip(&anchor).map(|(u, v)| u + gamma * v).collect();
        let x_star = exact_shifted_solve(&reg, &rhs).unwrap();
        let coef = (gamma * gamma + 12.0 * s.lambda1() * a.frob_sq()) / (mu + gamma);
        for _ in 0..5 {
            let dir = random_unit(&mut rng, d);
            let x: Vec<f64> = x_star.iter().zip(&dir).map(|(u, v)| u + v).collect();
            let lhs = weighted_variance(
                &a,
                |i, y| regularized_component_gradient(&a, lambda, gamma, i, y, &anchor, &b).unwrap(),
                &x,
                &x_star,
            );
            let gap = 0.5 * reg.b_norm(&sub(&x, &x_star)).unwrap().powi(2);
            prop_assert!(lhs <= coef * gap + 1e-9, "{lhs} > {}", coef * gap);
        }
    }

    #[test]
    fn step_size_respects_smoothness(seed in any::<u64>(), eta_scale in 0.01f64..1.99, m_scale in 0.01f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, s) = gapped_instance(&mut rng, 30, 8, 0.05);
        let lambda = band_shift(&mut rng, &s);
        let op = ShiftedOperator::new(&a, lambda).unwrap().with_estimate(s.lambda1()).unwrap();
        let cfg = SvrgConfig::new(eta_scale, m_scale).unwrap();
        let p = EpochParams::offline(&op, &cfg).unwrap();
        prop_assert!(p.eta * p.s_bar < 0.25);
    }
}

#[test]
fn step_scale_at_two_is_rejected() {
    assert!(SvrgConfig::new(2.0, 1.0).is_err());
    assert!(SvrgConfig::new(1.0, 0.0).is_err());
}

/// `Σᵢ pᵢ·(1/pᵢ)(∇ψᵢ(x) − ∇ψᵢ(x₀)) + ∇f(x₀) = ∇f(x)` by exact summation.
#[test]
fn variance_reduced_gradient_is_unbiased() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let (a, s) = gapped_instance(&mut rng, 20, 6, 0.01);
        let lambda = band_shift(&mut rng, &s);
        let op = ShiftedOperator::new(&a, lambda).unwrap();
        let d = a.d();
        let b = random_unit(&mut rng, d);
        let x = random_unit(&mut rng, d);
        let x0 = random_unit(&mut rng, d);
        let grad_f = |y: &[f64]| sub(&op.apply(y).unwrap(), &b);
        let mut est = grad_f(&x0);
        for i in 0..a.n() {
            let diff = sub(
                &component_gradient(&a, lambda, i, &x, &b).unwrap(),
                &component_gradient(&a, lambda, i, &x0, &b).unwrap(),
            );
            for (e, v) in est.iter_mut().zip(diff) {
                *e += v;
            }
        }
        for (u, v) in est.iter().zip(grad_f(&x)) {
            assert!((u - v).abs() <= 1e-10 * v.abs().max(1.0));
        }
    }
}

#[test]
fn identical_seeds_give_identical_solves() {
    let a = reference();
    let op = ShiftedOperator::new(&a, 1.05).unwrap().with_estimate(1.0).unwrap();
    let dist = build_sampling_distribution(&a).unwrap();
    let cfg = SvrgConfig::practical();
    let run = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        solve_shifted_system(&op, &[0.6, 0.8], &[0.0, 0.0], 3, &cfg, &dist, &mut rng).unwrap()
    };
    let (x1, r1) = run(9);
    let (x2, r2) = run(9);
    assert_eq!(x1.as_slice(), x2.as_slice());
    assert_eq!(r1, r2);
    assert!(r1.inner_steps_total <= r1.epochs_run * r1.m_max);
    assert_eq!(r1.row_accesses, r1.epochs_run * 2 * a.n() as u64 + r1.inner_steps_total);
}

/// Mean halving of the squared B-norm error per epoch at the default constants.
#[test]
fn epochs_halve_expected_error() {
    let a = reference();
    let op = ShiftedOperator::new(&a, 1.1).unwrap().with_estimate(1.0).unwrap();
    let dist = build_sampling_distribution(&a).unwrap();
    let b = [0.6, 0.8];
    let x_star = exact_shifted_solve(&op, &b).unwrap();
    let x0 = [0.0, 0.0];
    let e0 = op.b_norm(&sub(&x0, &x_star)).unwrap().powi(2);
    let mut total = 0.0;
    let trials = 100;
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, _) = svrg_epoch(&op, &b, &x0, &SvrgConfig::default(), &dist, &mut rng).unwrap();
        total += op.b_norm(&sub(&x, &x_star)).unwrap().powi(2) / e0;
    }
    assert!(total / trials as f64 <= 0.6, "mean ratio {}", total / trials as f64);
}

#[test]
fn degenerate_acceleration_matches_plain_svrg() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (a, s) = gapped_instance(&mut rng, 30, 5, 0.1);
    let lambda = s.lambda1() * (1.0 + s.gap() / 20.0);
    let op = ShiftedOperator::new(&a, lambda).unwrap().with_estimate(s.lambda1()).unwrap();
    let dist = build_sampling_distribution(&a).unwrap();
    let b = random_unit(&mut rng, a.d());
    let init = vec![0.0; a.d()];
    let cfg = SvrgConfig::practical();
    let accel = AccelConfig {
        gamma: Some(0.0),
        outer_iterations: Some(1),
        ..AccelConfig::default()
    };
    let (xp, _) = solve_shifted_system(&op, &b, &init, 3, &cfg, &dist, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let (xa, r) = accelerated_solve(&op, &b, &init, 3, &accel, &cfg, &dist, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(xp.as_slice(), xa.as_slice());
    assert_eq!(r.outer_iterations, 1);
    let p = regularized_params(&op, 0.0, &cfg).unwrap();
    assert_eq!(p.m_max, r.m_max);
}

#[test]
fn accelerated_solve_reduces_error() {
    let a = reference();
    let op = ShiftedOperator::new(&a, 1.05).unwrap().with_estimate(1.0).unwrap();
    let dist = build_sampling_distribution(&a).unwrap();
    let b = [0.6, 0.8];
    let x_star = exact_shifted_solve(&op, &b).unwrap();
    let x0 = [0.0, 0.0];
    let e0 = op.b_norm(&sub(&x0, &x_star)).unwrap().powi(2);
    let halvings = 4;
    let trials = 40;
    let mut total = 0.0;
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, r) = accelerated_solve(&op, &b, &x0, halvings, &AccelConfig::default(), &SvrgConfig::practical(), &dist, &mut rng).unwrap();
        assert!(r.gamma.unwrap() >= 2.0 * 0.05 - 1e-12);
        total += op.b_norm(&sub(&x, &x_star)).unwrap().powi(2) / e0;
    }
    let mean = total / trials as f64;
    assert!(mean <= 1.5 * 0.5f64.powi(halvings as i32), "mean ratio {mean}");
}
