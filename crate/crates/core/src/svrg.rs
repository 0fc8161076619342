//! SVRG for `f(x) = ½xᵀBx − bᵀx`, written as a sum of the (possibly
//! non-convex) components `ψᵢ(x) = ½xᵀ(λpᵢI − aᵢaᵢᵀ)x − bᵀx/n` with
//! importance sampling `pᵢ = ‖aᵢ‖²/‖A‖_F²`.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{CsrMatrix, SamplingDistribution, ShiftedOperator};
use crate::scalar::Scalar;
use crate::vector::{check_len, Vector};

/// Step size and epoch length multipliers.
///
/// With both scales at 1 the solver uses `η = 1/(8S̄)` and draws the epoch
/// length uniformly from `1..=⌈64S̄/μ⌉`, where `S̄ = 2λ₁‖A‖_F²/μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrgConfig {
    pub eta_scale: f64,
    pub m_scale: f64,
}

impl Default for SvrgConfig {
    fn default() -> Self {
        SvrgConfig {
            eta_scale: 1.0,
            m_scale: 1.0,
        }
    }
}

impl SvrgConfig {
    pub fn new(eta_scale: f64, m_scale: f64) -> Result<Self> {
        let cfg = SvrgConfig { eta_scale, m_scale };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Shorter epochs with a larger step. Keeps `ηS̄ < 1/4`; the expected
    /// per-epoch contraction is no longer covered by the worst-case bound and
    /// is checked empirically instead.
    pub fn practical() -> Self {
        SvrgConfig {
            eta_scale: 1.5,
            m_scale: 0.15,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_scale > 0.0 && self.eta_scale.is_finite()) {
            return Err(Error::config("eta_scale must be positive"));
        }
        if !(self.m_scale > 0.0 && self.m_scale.is_finite()) {
            return Err(Error::config("m_scale must be positive"));
        }
        // ηS̄ = eta_scale/8 must stay below 1/4
        if self.eta_scale >= 2.0 {
            return Err(Error::config("eta_scale must be below 2 so that eta * S_bar < 1/4"));
        }
        Ok(())
    }
}

/// Concrete step size and epoch cap for one system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochParams<T> {
    pub eta: T,
    pub m_max: u64,
    pub s_bar: T,
    pub mu: T,
}

/// Longest epoch we are willing to run.
const M_MAX_LIMIT: f64 = 1e15;

impl<T: Scalar> EpochParams<T> {
    /// `η = eta_scale/(8S̄)`, `m_max = ⌈m_scale·64S̄/μ⌉`.
    pub fn from_constants(s_bar: T, mu: T, cfg: &SvrgConfig) -> Result<Self> {
        cfg.validate()?;
        if !(mu > T::zero()) || !(s_bar > T::zero()) {
            return Err(Error::config(format!(
                "smoothness {s_bar} and strong convexity {mu} must be positive"
            )));
        }
        let eta = T::lit(cfg.eta_scale) / (T::lit(8.0) * s_bar);
        let m = (cfg.m_scale * 64.0 * s_bar.to_f64_lossy() / mu.to_f64_lossy()).ceil();
        if !m.is_finite() || m > M_MAX_LIMIT {
            return Err(Error::config(format!("epoch length {m:e} is too large")));
        }
        Ok(EpochParams {
            eta,
            m_max: (m as u64).max(1),
            s_bar,
            mu,
        })
    }

    /// Offline constants `μ = λ − λ̂₁`, `S̄ = 2λ̂₁‖A‖_F²/μ`.
    pub fn offline(op: &ShiftedOperator<'_, T>, cfg: &SvrgConfig) -> Result<Self> {
        let mu = op.mu_estimate()?;
        let l1 = op.lambda1_estimate().ok_or(Error::MissingEigenvalueEstimate)?;
        let s_bar = T::lit(2.0) * l1 * op.matrix().frob_sq() / mu;
        Self::from_constants(s_bar, mu, cfg)
    }
}

/// Per-solve telemetry. Work counts scalar multiply-adds over stored entries
/// and dense coordinates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub epochs_run: u64,
    pub inner_steps_total: u64,
    pub full_gradient_count: u64,
    /// Largest epoch cap used.
    pub m_max: u64,
    pub eta: f64,
    pub row_accesses: u64,
    pub work: u64,
    /// `‖Bx − b‖₂` at exit.
    pub final_b_norm_residual_proxy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub gamma_floored: bool,
    #[serde(default)]
    pub outer_iterations: u64,
}

impl SolverReport {
    /// Adds the counters of `other`; scalar fields keep the latest values.
    pub fn absorb(&mut self, other: &SolverReport) {
        self.epochs_run += other.epochs_run;
        self.inner_steps_total += other.inner_steps_total;
        self.full_gradient_count += other.full_gradient_count;
        self.m_max = self.m_max.max(other.m_max);
        self.eta = other.eta;
        self.row_accesses += other.row_accesses;
        self.work += other.work;
        self.final_b_norm_residual_proxy = other.final_b_norm_residual_proxy;
        if other.gamma.is_some() {
            self.gamma = other.gamma;
        }
        self.gamma_floored |= other.gamma_floored;
        self.outer_iterations += other.outer_iterations;
    }
}

/// `∇ψᵢ(x) = (λ‖aᵢ‖²/‖A‖_F²)x − aᵢ(aᵢᵀx) − b/n`
pub fn component_gradient<T: Scalar>(
    a: &CsrMatrix<T>,
    lambda: T,
    i: usize,
    x: &[T],
    b: &[T],
) -> Result<Vector<T>> {
    if i >= a.n() {
        return Err(Error::IndexOutOfRange { index: i, len: a.n() });
    }
    check_len(x, a.d())?;
    check_len(b, a.d())?;
    if a.frob_sq() <= T::zero() {
        return Err(Error::ZeroMatrix);
    }
    let w = lambda * a.row_sq_norms()[i] / a.frob_sq();
    let inv_n = T::one() / T::from_usize(a.n()).expect("row count fits");
    let mut g: Vec<T> = x.iter().zip(b).map(|(&xj, &bj)| w * xj - bj * inv_n).collect();
    a.add_row_scaled(i, -a.row_dot(i, x), &mut g);
    Ok(Vector::from_vec_unchecked(g))
}

/// `x/(xᵀBx)`, the best scalar multiple of `x` as an approximation to `B⁻¹x`.
pub fn warm_start_guess<T: Scalar>(op: &ShiftedOperator<'_, T>, x: &[T]) -> Result<Vector<T>> {
    let q = op.quadratic_form(x)?;
    if !(q > T::zero()) {
        return Err(Error::NonPositiveQuadraticForm(q.to_f64_lossy()));
    }
    Ok(Vector::from_vec_unchecked(x.iter().map(|&v| v / q).collect()))
}

fn check_inputs<T: Scalar>(
    op: &ShiftedOperator<'_, T>,
    b: &[T],
    x0: &[T],
    dist: &SamplingDistribution<T>,
) -> Result<()> {
    check_len(b, op.dim())?;
    check_len(x0, op.dim())?;
    if dist.len() != op.matrix().n() {
        return Err(Error::DimensionMismatch {
            expected: op.matrix().n(),
            found: dist.len(),
        });
    }
    Ok(())
}

/// One epoch with explicit constants. The anchor gradient is `Bx₀ − b`; the
/// inner update is `x ← x − η[λ(x − x₀) − aᵢaᵢᵀ(x − x₀)/pᵢ + ∇f(x₀)]`.
pub(crate) fn run_epoch<T: Scalar, R: Rng + ?Sized>(
    op: &ShiftedOperator<'_, T>,
    b: &[T],
    x0: &[T],
    params: &EpochParams<T>,
    dist: &SamplingDistribution<T>,
    rng: &mut R,
    report: &mut SolverReport,
) -> Vector<T> {
    let a = op.matrix();
    let lambda = op.shift();
    let eta = params.eta;
    let d = a.d();

    let ax0 = a.mul_vec(x0).expect("length checked");
    let atax0 = a.mul_t_vec(&ax0).expect("length checked");
    let g0: Vec<T> = (0..d).map(|j| lambda * x0[j] - atax0[j] - b[j]).collect();
    // x − ηλ(x − x₀) − ηg₀ = (1 − ηλ)x + η(λx₀ − g₀)
    let keep = T::one() - eta * lambda;
    let drift: Vec<T> = (0..d).map(|j| eta * (lambda * x0[j] - g0[j])).collect();

    let m = rng.random_range(1..=params.m_max);
    let mut x = x0.to_vec();
    let mut inner_work = 0u64;
    for _ in 0..m {
        let i = dist.sample(rng);
        let s = (a.row_dot(i, &x) - ax0[i]) * eta / dist.probability(i);
        for (xj, &dj) in x.iter_mut().zip(&drift) {
            *xj = keep * *xj + dj;
        }
        a.add_row_scaled(i, s, &mut x);
        inner_work += (2 * a.row_nnz(i) + d) as u64;
    }

    report.epochs_run += 1;
    report.inner_steps_total += m;
    report.full_gradient_count += 1;
    report.m_max = report.m_max.max(params.m_max);
    report.eta = eta.to_f64_lossy();
    report.row_accesses += 2 * a.n() as u64 + m;
    report.work += (2 * a.nnz() + d) as u64 + inner_work;
    Vector::from_vec_unchecked(x)
}

/// One SVRG epoch from anchor `x0`, returning the iterate at a uniformly
/// random stopping index.
pub fn svrg_epoch<T: Scalar, R: Rng + ?Sized>(
    op: &ShiftedOperator<'_, T>,
    b: &[T],
    x0: &[T],
    cfg: &SvrgConfig,
    dist: &SamplingDistribution<T>,
    rng: &mut R,
) -> Result<(Vector<T>, SolverReport)> {
    check_inputs(op, b, x0, dist)?;
    let params = EpochParams::offline(op, cfg)?;
    let mut report = SolverReport::default();
    let x = run_epoch(op, b, x0, &params, dist, rng, &mut report);
    Ok((x, report))
}

/// Runs `halvings` epochs back to back, each halving the expected squared
/// B-norm error.
pub fn solve_shifted_system<T: Scalar, R: Rng + ?Sized>(
    op: &ShiftedOperator<'_, T>,
    b: &[T],
    x_init: &[T],
    halvings: u32,
    cfg: &SvrgConfig,
    dist: &SamplingDistribution<T>,
    rng: &mut R,
) -> Result<(Vector<T>, SolverReport)> {
    if halvings == 0 {
        return Err(Error::config("halvings must be at least 1"));
    }
    check_inputs(op, b, x_init, dist)?;
    let params = EpochParams::offline(op, cfg)?;
    let mut report = SolverReport::default();
    let mut x = Vector::from_vec_unchecked(x_init.to_vec());
    for _ in 0..halvings {
        x = run_epoch(op, b, &x, &params, dist, rng, &mut report);
    }
    report.final_b_norm_residual_proxy = op.residual_norm(&x, b)?.to_f64_lossy();
    Ok((x, report))
}

/// Approximate application of `B⁻¹` with an expected-halving contract per
/// unit of `halvings`.
pub trait ShiftedSolver<T: Scalar> {
    fn solve(
        &self,
        op: &ShiftedOperator<'_, T>,
        b: &[T],
        x_init: &[T],
        halvings: u32,
        rng: &mut dyn RngCore,
    ) -> Result<(Vector<T>, SolverReport)>;
}

/// Plain SVRG bound to one matrix's sampling distribution.
#[derive(Debug, Clone)]
pub struct SvrgSolver<T> {
    cfg: SvrgConfig,
    dist: SamplingDistribution<T>,
}

impl<T: Scalar> SvrgSolver<T> {
    pub fn new(a: &CsrMatrix<T>, cfg: SvrgConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(SvrgSolver {
            cfg,
            dist: SamplingDistribution::from_matrix(a)?,
        })
    }

    pub fn config(&self) -> &SvrgConfig {
        &self.cfg
    }

    pub fn distribution(&self) -> &SamplingDistribution<T> {
        &self.dist
    }
}

impl<T: Scalar> ShiftedSolver<T> for SvrgSolver<T> {
    fn solve(
        &self,
        op: &ShiftedOperator<'_, T>,
        b: &[T],
        x_init: &[T],
        halvings: u32,
        rng: &mut dyn RngCore,
    ) -> Result<(Vector<T>, SolverReport)> {
        solve_shifted_system(op, b, x_init, halvings, &self.cfg, &self.dist, rng)
    }
}
