mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shiftinvert::online::{rayleigh_batch_sizes, stream_step_params, AtomStream, OnlineShift, ReplayData, ReplayStream};
use shiftinvert::vector::{dot, norm_sq, sub};
use shiftinvert::*;

const D: usize = 6;
const SPIKE: f64 = 4.0;

/// `B⁻¹y` for `B = (λ − 1)I − λ_s·e₁e₁ᵀ`.
fn spike_inverse(lambda: f64, y: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = y.iter().map(|v| v / (lambda - 1.0)).collect();
    out[0] = y[0] / (lambda - 1.0 - SPIKE);
    out
}

fn spike_quadratic(lambda: f64, e: &[f64]) -> f64 {
    (lambda - 1.0) * norm_sq(e) - SPIKE * e[0] * e[0]
}

/// Mean of `‖(λI − aaᵀ)e‖²` and of `‖(Σ − aaᵀ)x*‖²_{B⁻¹}` over fresh samples.
fn monte_carlo(stream: &mut SpikeStream, lambda: f64, e: &[f64], x_star: &[f64], samples: usize) -> (f64, f64) {
    let mut a = vec![0.0; D];
    let (mut smooth, mut var) = (0.0, 0.0);
    for _ in 0..samples {
        stream.next_sample(&mut a).unwrap();
        let ae = dot(&a, e);
        let g: Vec<f64> = e.iter().zip(&a).map(|(ei, ai)| lambda * ei - ae * ai).collect();
        smooth += norm_sq(&g);
        let ax = dot(&a, x_star);
        let mut r: Vec<f64> = x_star.iter().zip(&a).map(|(xi, ai)| xi - ax * ai).collect();
        r[0] += SPIKE * x_star[0];
        var += dot(&r, &spike_inverse(lambda, &r));
    }
    (smooth / samples as f64, var / samples as f64)
}

#[test]
fn streaming_smoothness_and_variance() {
    let params = SpikeModelParams::axis(D, SPIKE, 3);
    let (l1, gap, v) = (params.lambda1(), params.gap(), params.nvar());
    let lambda = l1 * (1.0 + gap / 100.0);
    let mu = lambda - l1;
    let s_bar = lambda + v * l1 * l1 / mu;
    let mut stream = spike_sampler(params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let b = random_unit(&mut rng, D);
        let x_star = spike_inverse(lambda, &b);
        let e = random_unit(&mut rng, D);
        let (smooth, var) = monte_carlo(&mut stream, lambda, &e, &x_star, 100_000);
        let objective_gap = 0.5 * spike_quadratic(lambda, &e);
        assert!(smooth <= 1.1 * 2.0 * s_bar * objective_gap, "{smooth} > 2S̄·{objective_gap}");
        let sigma_bound = v * l1 * l1 / mu * norm_sq(&x_star);
        assert!(var <= 1.1 * sigma_bound, "{var} > {sigma_bound}");
    }
}

/// Expected inner direction equals `∇f(x)` by enumeration over two atoms.
#[test]
fn inner_direction_is_unbiased_by_enumeration() {
    let atoms = vec![vec![1.0, 2.0, 0.0], vec![0.5, -1.0, 3.0]];
    let weights = [0.3, 0.7];
    let lambda = 20.0;
    let b = [0.2, -0.4, 1.0];
    let x = [0.3, 0.1, -0.2];
    let x0 = [1.0, -1.0, 0.5];
    let sigma_apply = |y: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; 3];
        for (a, &p) in atoms.iter().zip(&weights) {
            let s = p * dot(a, y);
            for (o, ai) in out.iter_mut().zip(a) {
                *o += s * ai;
            }
        }
        out
    };
    let grad_f = |y: &[f64]| -> Vec<f64> {
        let sy = sigma_apply(y);
        (0..3).map(|j| lambda * y[j] - sy[j] - b[j]).collect()
    };
    let anchor = grad_f(&x0);
    let diff = sub(&x, &x0);
    let mut expected = vec![0.0; 3];
    for (a, &p) in atoms.iter().zip(&weights) {
        let s = dot(a, &diff);
        for j in 0..3 {
            expected[j] += p * (lambda * diff[j] - s * a[j] + anchor[j]);
        }
    }
    for (u, v) in expected.iter().zip(grad_f(&x)) {
        assert!((u - v).abs() < 1e-12);
    }

    let stream = AtomStream::new(atoms.clone(), weights.to_vec(), 0).unwrap();
    assert_eq!(stream.probabilities().len(), 2);
}

#[test]
fn point_mass_solve_converges() {
    let a = vec![1.0, 2.0];
    let mut s = AtomStream::point_mass(a.clone()).unwrap();
    let lambda1 = 5.0;
    let shift = OnlineShift::place(lambda1, 1.0, 0.2);
    let b = [0.6, 0.8];
    // (λI − aaᵀ)⁻¹b by 2×2 Cramer
    let (p, q, r) = (shift.shift - 1.0, -2.0, shift.shift - 4.0);
    let det = p * r - q * q;
    let x_star = [(r * b[0] - q * b[1]) / det, (p * b[1] - q * b[0]) / det];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = StreamSolverConfig::practical();
    let (x, used) = streaming_solve(&mut s, shift, &b, 1e-6, &cfg, &mut rng).unwrap();
    assert_eq!(used, SampleStream::<f64>::samples_drawn(&s));
    let err = norm_sq(&sub(&x, &x_star)).sqrt() / norm_sq(&x_star).sqrt();
    assert!(err < 1e-3, "relative error {err}");
}

#[test]
fn rayleigh_estimate_consumes_exact_batch() {
    let params = SpikeModelParams::axis(5, 9.0, 11);
    let mut s = spike_sampler(params.clone()).unwrap();
    let x = [1.0, 0.0, 0.0, 0.0, 0.0];
    let z: f64 = estimate_rayleigh_online(&mut s, &x, 0.2, 0.1).unwrap();
    let (k, m) = rayleigh_batch_sizes(params.nvar(), 0.2, 0.1, 20.0);
    assert_eq!(SampleStream::<f64>::samples_drawn(&s), k * m);
    assert!((z - 10.0).abs() <= 0.2 * 10.0);
}

#[test]
fn online_power_accounts_every_sample() {
    let params = SpikeModelParams::axis(8, 9.0, 4);
    let mut s = spike_sampler(params.clone()).unwrap();
    let shift = OnlineShift::place(params.lambda1(), params.gap(), 1.0 / 8.0);
    let mut x0 = vec![0.0f64; 8];
    x0[0] = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = OnlineConfig {
        trace: true,
        ..OnlineConfig::practical()
    };
    let r = top_eigenvector_online(&mut s, &x0, shift, 1e-2, 0.2, &cfg, &mut rng).unwrap();
    assert_eq!(r.report.samples_used, SampleStream::<f64>::samples_drawn(&s));
    assert_eq!(r.report.trace.len(), r.report.warm_iterations);
    assert!(r.vector.as_slice()[0].abs() >= 0.99);
    assert!((r.vector.norm() - 1.0).abs() < 1e-12);
}

#[test]
fn streams_emit_finite_vectors_and_valid_bounds() {
    let mut spike = spike_sampler(SpikeModelParams::axis(4, 2.0, 0)).unwrap();
    let mut buf = [0.0f64; 4];
    for _ in 0..100 {
        spike.next_sample(&mut buf).unwrap();
        assert!(buf.iter().all(|v| v.is_finite()));
    }
    assert!(SampleStream::<f64>::nvar_bound(&spike) >= 1.0);
    let atoms = AtomStream::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0, 1.0], 0).unwrap();
    // Σ = I/2 and E(aaᵀ)² = I/2, so v = (1/2)/(1/2)² = 2
    assert!((SampleStream::<f64>::nvar_bound(&atoms) - 2.0).abs() < 1e-9);

    let data = ReplayData::record::<f64, _>(&mut spike, 3).unwrap();
    let mut replay = ReplayStream::new(data.clone()).unwrap();
    let mut first = [0.0f64; 4];
    replay.next_sample(&mut first).unwrap();
    assert_eq!(&first[..], &data.values[..4]);
}

#[test]
fn step_constants_follow_the_corollary() {
    let cfg = StreamSolverConfig::default();
    let (lambda, l1, v, c3) = (11.0, 10.0, 4.9, 0.01);
    let p = stream_step_params(&cfg, lambda, l1, v, c3).unwrap();
    let s_bar = lambda + v * l1 * l1 / (lambda - l1);
    assert!((p.s_bar - s_bar).abs() < 1e-9);
    assert!((p.step - cfg.c2 / (8.0 * s_bar)).abs() < 1e-15);
    assert_eq!(p.m, (s_bar / (cfg.c2 * cfg.c2)).ceil() as u64);
    assert_eq!(p.k, (s_bar / cfg.c2).max(v * l1 * l1 / c3).ceil() as u64);
    assert!(stream_step_params(&cfg, 9.0, l1, v, c3).is_err());
}
