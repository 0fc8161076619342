//! Accelerated solver: SVRG on the γ-regularized objective
//! `f_{γ,y}(x) = ½xᵀBx − bᵀx + (γ/2)‖x − y‖²` inside an accelerated
//! proximal-point outer loop with constant momentum.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{CsrMatrix, SamplingDistribution, ShiftedOperator};
use crate::scalar::Scalar;
use crate::svrg::{component_gradient, run_epoch, EpochParams, ShiftedSolver, SolverReport, SvrgConfig};
use crate::vector::{check_len, Vector};

/// Every field left as `None` takes the default derived from the instance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AccelConfig {
    /// Regularization strength. Default `√(d·λ̂₁·‖A‖_F²/nnz(A))`, raised to
    /// `2μ̂` when smaller. An explicit `0` disables regularization entirely.
    pub gamma: Option<f64>,
    /// Expected function-error reduction `c` per proximal subproblem.
    /// Default `4((2γ+μ)/μ)^{3/2}`.
    pub inner_progress_target: Option<f64>,
    /// Outer iterations for a `2^halvings` reduction.
    /// Default `⌈√⌈γ/μ⌉ · halvings⌉`.
    pub outer_iterations: Option<u64>,
}

/// Resolved outer-loop constants for one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelParams<T> {
    pub gamma: T,
    pub gamma_floored: bool,
    pub inner_progress: T,
    pub outer_iterations: u64,
    pub beta: T,
}

impl AccelConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.gamma {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::config("gamma must be finite and non-negative"));
            }
        }
        if let Some(c) = self.inner_progress_target {
            if !(c > 1.0 && c.is_finite()) {
                return Err(Error::config("inner progress target must exceed 1"));
            }
        }
        if self.outer_iterations == Some(0) {
            return Err(Error::config("outer_iterations must be at least 1"));
        }
        Ok(())
    }

    pub fn resolve<T: Scalar>(&self, op: &ShiftedOperator<'_, T>, halvings: u32) -> Result<AccelParams<T>> {
        self.validate()?;
        let mu = op.mu_estimate()?;
        let l1 = op.lambda1_estimate().ok_or(Error::MissingEigenvalueEstimate)?;
        let a = op.matrix();
        let (gamma, gamma_floored) = match self.gamma {
            Some(g) if g == 0.0 => (T::zero(), false),
            requested => {
                let g = match requested {
                    Some(g) => T::lit(g),
                    None => default_gamma(a, l1),
                };
                let floor = T::lit(2.0) * mu;
                if g < floor {
                    (floor, true)
                } else {
                    (g, false)
                }
            }
        };
        let c_total = T::lit(2.0).powi(halvings as i32);
        let inner_progress = match self.inner_progress_target {
            Some(c) => T::lit(c),
            None if gamma == T::zero() => c_total,
            None => T::lit(4.0) * ((T::lit(2.0) * gamma + mu) / mu).powf(T::lit(1.5)),
        };
        let outer_iterations = match self.outer_iterations {
            Some(k) => k,
            None if gamma == T::zero() => 1,
            None => {
                let ratio = (gamma / mu).ceil().to_f64_lossy();
                (ratio.sqrt() * halvings as f64).ceil().max(1.0) as u64
            }
        };
        let q = mu / (mu + gamma);
        let beta = (T::one() - q.sqrt()) / (T::one() + q.sqrt());
        Ok(AccelParams {
            gamma,
            gamma_floored,
            inner_progress,
            outer_iterations,
            beta,
        })
    }
}

/// `√(d·λ̂₁·‖A‖_F²/nnz(A))`
pub fn default_gamma<T: Scalar>(a: &CsrMatrix<T>, lambda1: T) -> T {
    let d = T::from_usize(a.d()).expect("dimension fits");
    let nnz = T::from_usize(a.nnz().max(1)).expect("nnz fits");
    (d * lambda1 * a.frob_sq() / nnz).sqrt()
}

/// `∇ψᵢ(x) + (γ‖aᵢ‖²/‖A‖_F²)(x − x₀)`
pub fn regularized_component_gradient<T: Scalar>(
    a: &CsrMatrix<T>,
    lambda: T,
    gamma: T,
    i: usize,
    x: &[T],
    x0_anchor: &[T],
    b: &[T],
) -> Result<Vector<T>> {
    check_len(x0_anchor, a.d())?;
    let mut g = component_gradient(a, lambda, i, x, b)?;
    let w = gamma * a.row_sq_norms()[i] / a.frob_sq();
    for ((gj, &xj), &yj) in g.iter_mut().zip(x).zip(x0_anchor) {
        *gj = *gj + w * (xj - yj);
    }
    Ok(g)
}

/// SVRG constants for the regularized problem: `μ_reg = μ + γ`,
/// `S̄_reg = (γ² + 12λ̂₁‖A‖_F²)/(2(μ + γ))`. With `γ = 0` the plain offline
/// constants are used.
pub fn regularized_params<T: Scalar>(
    op: &ShiftedOperator<'_, T>,
    gamma: T,
    cfg: &SvrgConfig,
) -> Result<EpochParams<T>> {
    if gamma == T::zero() {
        return EpochParams::offline(op, cfg);
    }
    let mu = op.mu_estimate()?;
    let l1 = op.lambda1_estimate().ok_or(Error::MissingEigenvalueEstimate)?;
    let mu_reg = mu + gamma;
    let s_reg = (gamma * gamma + T::lit(12.0) * l1 * op.matrix().frob_sq()) / (T::lit(2.0) * mu_reg);
    EpochParams::from_constants(s_reg, mu_reg, cfg)
}

/// Reduces the expected error of `f_{γ,x₀}` by a factor `c`, through
/// `⌈log₂ c⌉` SVRG epochs on `(B + γI)x = b + γx₀` started at `x₀`.
#[allow(clippy::too_many_arguments)]
pub fn solve_regularized<T: Scalar, R: Rng + ?Sized>(
    op: &ShiftedOperator<'_, T>,
    gamma: T,
    b: &[T],
    x0: &[T],
    c: T,
    cfg: &SvrgConfig,
    dist: &SamplingDistribution<T>,
    rng: &mut R,
    report: &mut SolverReport,
) -> Result<Vector<T>> {
    if !(c > T::one()) {
        return Err(Error::config("progress target c must exceed 1"));
    }
    check_len(b, op.dim())?;
    check_len(x0, op.dim())?;
    let params = regularized_params(op, gamma, cfg)?;
    let reg_op = regularized_operator(op, gamma)?;
    let rhs: Vec<T> = b.iter().zip(x0).map(|(&bj, &yj)| bj + gamma * yj).collect();
    let halvings = c.log2().ceil().to_f64_lossy().max(1.0) as u64;
    let mut x = Vector::from_vec_unchecked(x0.to_vec());
    for _ in 0..halvings {
        x = run_epoch(&reg_op, &rhs, &x, &params, dist, rng, report);
    }
    Ok(x)
}

fn regularized_operator<'a, T: Scalar>(op: &ShiftedOperator<'a, T>, gamma: T) -> Result<ShiftedOperator<'a, T>> {
    let reg = ShiftedOperator::new(op.matrix(), op.shift() + gamma)?;
    match op.lambda1_estimate() {
        Some(l1) => reg.with_estimate(l1),
        None => Ok(reg),
    }
}

/// Accelerated proximal point: `x_{t+1} ≈ argmin f_{γ,y_t}`,
/// `y_{t+1} = x_{t+1} + β(x_{t+1} − x_t)` with `β = (1 − √q)/(1 + √q)`,
/// `q = μ/(μ + γ)`.
#[allow(clippy::too_many_arguments)]
pub fn accelerated_solve<T: Scalar, R: Rng + ?Sized>(
    op: &ShiftedOperator<'_, T>,
    b: &[T],
    x_init: &[T],
    halvings: u32,
    accel: &AccelConfig,
    cfg: &SvrgConfig,
    dist: &SamplingDistribution<T>,
    rng: &mut R,
) -> Result<(Vector<T>, SolverReport)> {
    if halvings == 0 {
        return Err(Error::config("halvings must be at least 1"));
    }
    check_len(b, op.dim())?;
    check_len(x_init, op.dim())?;
    if dist.len() != op.matrix().n() {
        return Err(Error::DimensionMismatch {
            expected: op.matrix().n(),
            found: dist.len(),
        });
    }
    let p = accel.resolve(op, halvings)?;
    let mut report = SolverReport {
        gamma: Some(p.gamma.to_f64_lossy()),
        gamma_floored: p.gamma_floored,
        ..SolverReport::default()
    };
    let mut x = x_init.to_vec();
    let mut y = x_init.to_vec();
    for _ in 0..p.outer_iterations {
        let next = solve_regularized(op, p.gamma, b, &y, p.inner_progress, cfg, dist, rng, &mut report)?
            .into_inner();
        for j in 0..y.len() {
            y[j] = next[j] + p.beta * (next[j] - x[j]);
        }
        x = next;
        report.outer_iterations += 1;
    }
    report.final_b_norm_residual_proxy = op.residual_norm(&x, b)?.to_f64_lossy();
    Ok((Vector::from_vec_unchecked(x), report))
}

#[derive(Debug, Clone)]
pub struct AcceleratedSolver<T> {
    svrg: SvrgConfig,
    accel: AccelConfig,
    dist: SamplingDistribution<T>,
}

impl<T: Scalar> AcceleratedSolver<T> {
    pub fn new(a: &CsrMatrix<T>, svrg: SvrgConfig, accel: AccelConfig) -> Result<Self> {
        svrg.validate()?;
        accel.validate()?;
        Ok(AcceleratedSolver {
            svrg,
            accel,
            dist: SamplingDistribution::from_matrix(a)?,
        })
    }
}

impl<T: Scalar> ShiftedSolver<T> for AcceleratedSolver<T> {
    fn solve(
        &self,
        op: &ShiftedOperator<'_, T>,
        b: &[T],
        x_init: &[T],
        halvings: u32,
        rng: &mut dyn RngCore,
    ) -> Result<(Vector<T>, SolverReport)> {
        accelerated_solve(op, b, x_init, halvings, &self.accel, &self.svrg, &self.dist, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svrg::solve_shifted_system;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reference() -> CsrMatrix<f64> {
        CsrMatrix::from_dense_rows(&[vec![1.0, 0.0], vec![0.0, 0.5f64.sqrt()]]).unwrap()
    }

    #[test]
    fn zero_gamma_reduces_to_plain_gradient() {
        let a = reference();
        let x = [0.3, -0.7];
        let b = [1.0, 2.0];
        let plain = component_gradient(&a, 1.1, 1, &x, &b).unwrap();
        let reg = regularized_component_gradient(&a, 1.1, 0.0, 1, &x, &[5.0, 5.0], &b).unwrap();
        assert_eq!(plain, reg);
        let at_anchor = regularized_component_gradient(&a, 1.1, 3.0, 1, &x, &x, &b).unwrap();
        assert_eq!(plain, at_anchor);
    }

    #[test]
    fn gamma_defaults_and_floor() {
        let a = reference();
        let op = ShiftedOperator::new(&a, 1.005).unwrap().with_estimate(1.0).unwrap();
        let p = AccelConfig::default().resolve(&op, 3).unwrap();
        assert!((p.gamma - (2.0f64 * 1.5 / 2.0).sqrt()).abs() < 1e-12);
        assert!(!p.gamma_floored);
        let tiny = AccelConfig {
            gamma: Some(1e-6),
            ..Default::default()
        };
        let p = tiny.resolve(&op, 3).unwrap();
        assert!(p.gamma_floored && (p.gamma - 0.01).abs() < 1e-12);
        let zero = AccelConfig {
            gamma: Some(0.0),
            ..Default::default()
        };
        let p = zero.resolve(&op, 5).unwrap();
        assert_eq!((p.outer_iterations, p.beta), (1, 0.0));
        assert_eq!(p.inner_progress, 32.0);
    }

    #[test]
    fn zero_gamma_matches_plain_solver() {
        let a = reference();
        let op = ShiftedOperator::new(&a, 1.05).unwrap().with_estimate(1.0).unwrap();
        let dist = SamplingDistribution::from_matrix(&a).unwrap();
        let cfg = SvrgConfig::default();
        let accel = AccelConfig {
            gamma: Some(0.0),
            ..Default::default()
        };
        let b = [1.0, -0.5];
        let x0 = [0.1, 0.2];
        let (u, _) =
            accelerated_solve(&op, &b, &x0, 4, &accel, &cfg, &dist, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let (v, _) = solve_shifted_system(&op, &b, &x0, 4, &cfg, &dist, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(u, v);
    }

    #[test]
    fn preserves_exact_solution() {
        let a = reference();
        let lambda = 1.005;
        let op = ShiftedOperator::new(&a, lambda).unwrap().with_estimate(1.0).unwrap();
        let dist = SamplingDistribution::from_matrix(&a).unwrap();
        let b = [1.0, 1.0];
        let xs = [1.0 / (lambda - 1.0), 1.0 / (lambda - 0.5)];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (x, report) = accelerated_solve(
            &op,
            &b,
            &xs,
            2,
            &AccelConfig::default(),
            &SvrgConfig::new(1.0, 0.01).unwrap(),
            &dist,
            &mut rng,
        )
        .unwrap();
        for j in 0..2 {
            assert!((x[j] - xs[j]).abs() <= 1e-10 * xs[j].abs());
        }
        assert!(report.outer_iterations >= 1);
    }
}
