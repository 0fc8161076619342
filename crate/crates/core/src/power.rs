//! Shifted-and-inverted power method with approximate solves: random start,
//! burn-in, then accept/reject warm-start iterations on a geometric error
//! schedule.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::accel::{AccelConfig, AcceleratedSolver};
use crate::error::{Error, Result};
use crate::matrix::{rayleigh_quotient, CsrMatrix, ShiftedOperator};
use crate::scalar::Scalar;
use crate::shift::{estimate_shift, ConjugateGradientShiftInverse, ShiftConfig, ShiftSearchResult};
use crate::svrg::{warm_start_guess, ShiftedSolver, SolverReport, SvrgConfig, SvrgSolver};
use crate::vector::{gaussian_vector, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Plain,
    Accelerated,
}

/// Where the shift `λ` and the estimate `λ̂₁` come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftSource {
    /// Run the shift search, then place `λ = λ̃₁(1 + placement·gap̂)`.
    Estimate { search: ShiftConfig, placement: f64 },
    Known {
        shift: f64,
        lambda1_estimate: f64,
        gap_estimate: f64,
    },
}

impl Default for ShiftSource {
    fn default() -> Self {
        ShiftSource::Estimate {
            search: ShiftConfig::default(),
            placement: 1.0 / 125.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    /// Target Rayleigh error relative to `λ₁`.
    pub target_epsilon: f64,
    /// Failure probability used to size the warm schedule.
    pub delta: f64,
    /// Default `⌈burn_in_constant·(ln d + ln κ̂)⌉` with `κ̂ = λ/(λ − λ̂₁)`.
    pub burn_in_iterations: Option<usize>,
    pub burn_in_constant: f64,
    /// Solver halvings per burn-in step.
    pub burn_in_halvings: u32,
    /// Default `⌈log₅(1/(√10·δ·G_target))⌉`, `G_target = √(ε·λ̂₁/(λ − λ̂₁))`.
    pub warm_iterations: Option<usize>,
    /// Added to `⌈log₂(1/c₁(i)²)⌉` in the warm loop.
    pub extra_halvings: u32,
    /// Further warm iterations allowed while the final check fails.
    pub max_extra_iterations: usize,
    pub solver: SolverChoice,
    pub svrg: SvrgConfig,
    pub accel: AccelConfig,
    pub shift: ShiftSource,
    /// Accept requires `quot(x̂) ≥ λ̂₁ − accept_rq_slack·(λ − λ̂₁)`.
    pub accept_rq_slack: f64,
    /// Accept requires `‖x̂‖ ≥ accept_norm_factor/(λ − λ̂₁)`.
    pub accept_norm_factor: f64,
    pub seed: u64,
    pub trace: bool,
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig {
            target_epsilon: 1e-6,
            delta: 0.05,
            burn_in_iterations: None,
            burn_in_constant: 1.0,
            burn_in_halvings: 4,
            warm_iterations: None,
            extra_halvings: 1,
            max_extra_iterations: 10,
            solver: SolverChoice::Plain,
            svrg: SvrgConfig::default(),
            accel: AccelConfig::default(),
            shift: ShiftSource::default(),
            accept_rq_slack: 1.0 / 6.0,
            accept_norm_factor: 2.0 / 3.0,
            seed: 0,
            trace: false,
        }
    }
}

impl PowerConfig {
    /// Shorter SVRG epochs, far fewer block power steps in the shift search,
    /// and the shift at the top of the guaranteed band instead of near its
    /// bottom. Plain SVRG cost grows as `1/(λ − λ₁)²`.
    pub fn practical() -> Self {
        PowerConfig {
            svrg: SvrgConfig::practical(),
            shift: ShiftSource::Estimate {
                search: ShiftConfig {
                    c: 0.05,
                    ..ShiftConfig::default()
                },
                placement: 1.0 / 8.0,
            },
            ..PowerConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_epsilon > 0.0 && self.target_epsilon < 1.0) {
            return Err(Error::config("target_epsilon must lie in (0, 1)"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config("delta must lie in (0, 1)"));
        }
        if !(self.burn_in_constant > 0.0) || self.burn_in_halvings == 0 {
            return Err(Error::config("burn-in constant and halvings must be positive"));
        }
        if !(self.accept_rq_slack > 0.0 && self.accept_norm_factor > 0.0) {
            return Err(Error::config("acceptance thresholds must be positive"));
        }
        self.svrg.validate()?;
        self.accel.validate()?;
        match self.shift {
            ShiftSource::Estimate { search, placement } => {
                search.validate()?;
                if !(placement > 0.0) {
                    return Err(Error::config("shift placement must be positive"));
                }
            }
            ShiftSource::Known {
                shift,
                lambda1_estimate,
                gap_estimate,
            } => {
                if !(shift > lambda1_estimate && lambda1_estimate > 0.0) {
                    return Err(Error::config("known shift must exceed the positive lambda1 estimate"));
                }
                if !(gap_estimate > 0.0 && gap_estimate <= 1.0) {
                    return Err(Error::config("gap estimate must lie in (0, 1]"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub phase: String,
    pub accepted: bool,
    pub rayleigh: f64,
    /// `max(0, λ̂₁ − quot(x))`
    pub rayleigh_error: f64,
    /// `√(rayleigh_error/(λ − λ̂₁))`, the lower sandwich bound on `G(x)`.
    pub g_proxy: f64,
    pub cumulative_work: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub solver: SolverReport,
    pub burn_in_iterations: usize,
    pub warm_iterations: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// Stream samples consumed (online runs only).
    pub samples_used: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct EigenResult<T> {
    pub vector: Vector<T>,
    pub rayleigh: T,
    /// Certified `|v₁ᵀx|` lower bound, when the Rayleigh error permits one.
    pub alignment_lower_bound: Option<T>,
    pub shift_used: T,
    pub lambda1_estimate: T,
    pub gap_estimate: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_search: Option<ShiftSearchResult>,
    pub report: PowerReport,
}

/// `x/‖x‖` with `x ∼ N(0, I_d)`.
pub fn random_unit_init<T: Scalar, R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Vector<T>> {
    if d == 0 {
        return Err(Error::config("dimension must be at least 1"));
    }
    loop {
        let v = Vector::from_vec_unchecked(gaussian_vector(d, rng));
        if v.norm() > T::zero() {
            return v.normalized();
        }
    }
}

fn normalize<T: Scalar>(x: Vector<T>) -> Result<Vector<T>> {
    let n = x.norm();
    if !(n > T::zero()) || !n.is_finite() {
        return Err(Error::NotConverged("solver returned a zero or non-finite vector".into()));
    }
    Ok(Vector::from_vec_unchecked(x.iter().map(|&v| v / n).collect()))
}

/// `iterations` approximate inverse steps `x ← solve(x)/‖solve(x)‖`, each
/// warm-started at `x/(xᵀBx)`.
pub fn burn_in<T: Scalar>(
    op: &ShiftedOperator<'_, T>,
    x0: &[T],
    iterations: usize,
    halvings: u32,
    solver: &dyn ShiftedSolver<T>,
    rng: &mut dyn RngCore,
    report: &mut SolverReport,
) -> Result<Vector<T>> {
    let mut x = Vector::from_vec_unchecked(x0.to_vec());
    for _ in 0..iterations {
        let guess = warm_start_guess(op, &x)?;
        let (xh, r) = solver.solve(op, &x, &guess, halvings, rng)?;
        report.absorb(&r);
        x = normalize(xh)?;
    }
    Ok(x)
}

/// Accept/reject thresholds of one warm iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptRule<T> {
    pub lambda1_estimate: T,
    pub shift: T,
    pub rq_slack: T,
    pub norm_factor: T,
}

impl<T: Scalar> AcceptRule<T> {
    pub fn new(shift: T, lambda1_estimate: T) -> Self {
        AcceptRule {
            lambda1_estimate,
            shift,
            rq_slack: T::lit(1.0 / 6.0),
            norm_factor: T::lit(2.0 / 3.0),
        }
    }

    pub fn accepts(&self, rq: T, norm: T) -> bool {
        let gap = self.shift - self.lambda1_estimate;
        rq >= self.lambda1_estimate - self.rq_slack * gap && norm >= self.norm_factor / gap
    }
}

/// One warm-start iteration: `x̂ = solve(x, x/(xᵀBx))`, kept only when both
/// its Rayleigh quotient estimate and its norm pass `rule`. On rejection the
/// input is returned unchanged.
pub fn robust_power_iterate<T, S, E>(
    op: &ShiftedOperator<'_, T>,
    x: &[T],
    rule: &AcceptRule<T>,
    mut solve: S,
    mut rq_estimator: E,
) -> Result<(Vector<T>, bool)>
where
    T: Scalar,
    S: FnMut(&[T], &[T]) -> Result<Vector<T>>,
    E: FnMut(&[T]) -> Result<T>,
{
    let guess = warm_start_guess(op, x)?;
    let xh = solve(x, &guess)?;
    let n = xh.norm();
    if n > T::zero() && n.is_finite() {
        let unit = Vector::from_vec_unchecked(xh.iter().map(|&v| v / n).collect());
        let rq = rq_estimator(&unit)?;
        if rule.accepts(rq, n) {
            return Ok((unit, true));
        }
    }
    Ok((Vector::from_vec_unchecked(x.to_vec()), false))
}

/// `√(1 − ε_q/(λ̂₁·gap̂))`, or `None` when `ε_q > λ̂₁·gap̂`.
pub fn certify_alignment<T: Scalar>(rayleigh_error: T, lambda1_estimate: T, gap_estimate: T) -> Option<T> {
    let scale = lambda1_estimate * gap_estimate;
    if rayleigh_error < T::zero() || !(scale > T::zero()) || rayleigh_error > scale {
        return None;
    }
    Some((T::one() - rayleigh_error / scale).max(T::zero()).sqrt())
}

/// `c₁(i) = (1/√10)·5⁻ⁱ`
pub fn solver_error_schedule(i: usize) -> f64 {
    10f64.sqrt().recip() * 5f64.powi(-(i as i32))
}

/// `⌈log₂(1/c₁(i)²)⌉ + extra`
pub fn warm_halvings(i: usize, extra: u32) -> u32 {
    let c = solver_error_schedule(i);
    (1.0 / (c * c)).log2().ceil() as u32 + extra
}

/// `⌈log₅(1/(√10·δ·G_target))⌉`, at least 1.
pub fn default_warm_iterations(epsilon: f64, delta: f64, lambda1: f64, mu: f64) -> usize {
    let g_target = (epsilon * lambda1 / mu).sqrt();
    let k = (1.0 / (10f64.sqrt() * delta * g_target)).ln() / 5f64.ln();
    k.ceil().max(1.0) as usize
}

pub fn default_burn_in_iterations(constant: f64, d: usize, shift: f64, mu: f64) -> usize {
    let kappa = (shift / mu).max(1.0);
    (constant * ((d as f64).ln() + kappa.ln())).ceil().max(1.0) as usize
}

pub(crate) struct ResolvedShift {
    pub shift: f64,
    pub lambda1: f64,
    pub gap: f64,
    pub search: Option<ShiftSearchResult>,
}

fn resolve_shift<T: Scalar>(a: &CsrMatrix<T>, source: &ShiftSource, rng: &mut ChaCha8Rng) -> Result<ResolvedShift> {
    match *source {
        ShiftSource::Known {
            shift,
            lambda1_estimate,
            gap_estimate,
        } => Ok(ResolvedShift {
            shift,
            lambda1: lambda1_estimate,
            gap: gap_estimate,
            search: None,
        }),
        ShiftSource::Estimate { search, placement } => {
            let r = estimate_shift(a, &search, &ConjugateGradientShiftInverse::default(), rng)?;
            let gap = r.gap_estimate().clamp(f64::MIN_POSITIVE, 1.0);
            Ok(ResolvedShift {
                shift: r.lambda_tilde_1 * (1.0 + placement * gap),
                lambda1: r.lambda_tilde_1,
                gap,
                search: Some(r),
            })
        }
    }
}

fn trace_row<T: Scalar>(
    iteration: usize,
    phase: &str,
    accepted: bool,
    rq: T,
    lambda1: f64,
    mu: f64,
    work: u64,
) -> TraceRow {
    let rq = rq.to_f64_lossy();
    let err = (lambda1 - rq).max(0.0);
    TraceRow {
        iteration,
        phase: phase.to_string(),
        accepted,
        rayleigh: rq,
        rayleigh_error: err,
        g_proxy: (err / mu).sqrt(),
        cumulative_work: work,
    }
}

/// Full offline pipeline: shift search, random start, burn-in, warm
/// accept/reject iterations, then a final Rayleigh check against
/// `(1 − ε)λ̂₁`.
pub fn top_eigenvector_offline<T: Scalar>(a: &CsrMatrix<T>, cfg: &PowerConfig) -> Result<EigenResult<T>> {
    cfg.validate()?;
    if a.frob_sq() <= T::zero() {
        return Err(Error::ZeroMatrix);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let shift = resolve_shift(a, &cfg.shift, &mut rng)?;
    let (lambda, l1) = (T::lit(shift.shift), T::lit(shift.lambda1));
    let op = ShiftedOperator::new(a, lambda)?.with_estimate(l1)?;
    let mu = shift.shift - shift.lambda1;

    let solver: Box<dyn ShiftedSolver<T>> = match cfg.solver {
        SolverChoice::Plain => Box::new(SvrgSolver::new(a, cfg.svrg)?),
        SolverChoice::Accelerated => Box::new(AcceleratedSolver::new(a, cfg.svrg, cfg.accel)?),
    };

    let mut report = PowerReport::default();
    let d = a.d();
    let x0 = random_unit_init::<T, _>(d, &mut rng)?;
    let burn = cfg
        .burn_in_iterations
        .unwrap_or_else(|| default_burn_in_iterations(cfg.burn_in_constant, d, shift.shift, mu));
    let mut x = burn_in(&op, &x0, burn, cfg.burn_in_halvings, solver.as_ref(), &mut rng, &mut report.solver)?;
    report.burn_in_iterations = burn;
    if cfg.trace {
        let rq = rayleigh_quotient(a, &x)?;
        report
            .trace
            .push(trace_row(0, "burn-in", true, rq, shift.lambda1, mu, report.solver.work));
    }

    let rule = AcceptRule {
        lambda1_estimate: l1,
        shift: lambda,
        rq_slack: T::lit(cfg.accept_rq_slack),
        norm_factor: T::lit(cfg.accept_norm_factor),
    };
    let warm = cfg
        .warm_iterations
        .unwrap_or_else(|| default_warm_iterations(cfg.target_epsilon, cfg.delta, shift.lambda1, mu));
    let target = (T::one() - T::lit(cfg.target_epsilon)) * l1;
    let mut i = 0usize;
    loop {
        let halvings = warm_halvings(i, cfg.extra_halvings);
        let mut step_report = SolverReport::default();
        let (next, accepted) = robust_power_iterate(
            &op,
            &x,
            &rule,
            |b, init| {
                let (v, r) = solver.solve(&op, b, init, halvings, &mut rng)?;
                step_report = r;
                Ok(v)
            },
            |v| rayleigh_quotient(a, v),
        )?;
        report.solver.absorb(&step_report);
        x = next;
        if accepted {
            report.accepted += 1;
        } else {
            report.rejected += 1;
        }
        i += 1;
        let rq = rayleigh_quotient(a, &x)?;
        if cfg.trace {
            report
                .trace
                .push(trace_row(i, "warm", accepted, rq, shift.lambda1, mu, report.solver.work));
        }
        if i >= warm && rq >= target {
            break;
        }
        if i >= warm + cfg.max_extra_iterations {
            return Err(Error::NotConverged(format!(
                "Rayleigh quotient {rq} below (1 - {})·{} after {i} warm iterations ({} rejected)",
                cfg.target_epsilon, shift.lambda1, report.rejected
            )));
        }
    }
    report.warm_iterations = i;

    let rayleigh = rayleigh_quotient(a, &x)?;
    let err = (l1 - rayleigh).max(T::zero());
    Ok(EigenResult {
        alignment_lower_bound: certify_alignment(err, l1, T::lit(shift.gap)),
        vector: x,
        rayleigh,
        shift_used: lambda,
        lambda1_estimate: l1,
        gap_estimate: T::lit(shift.gap),
        shift_search: shift.search,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cg::ConjugateGradientSolver;
    use crate::vector::norm;

    fn reference() -> CsrMatrix<f64> {
        CsrMatrix::from_dense_rows(&[vec![1.0, 0.0], vec![0.0, 0.5f64.sqrt()]]).unwrap()
    }

    #[test]
    fn unit_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for d in [1, 2, 17] {
            let x: Vector<f64> = random_unit_init(d, &mut rng).unwrap();
            assert!((norm(&x) - 1.0).abs() < 1e-12);
        }
        assert!(random_unit_init::<f64, _>(0, &mut rng).is_err());
    }

    #[test]
    fn certify_cases() {
        assert_eq!(certify_alignment(0.0, 2.0, 0.5), Some(1.0));
        assert_eq!(certify_alignment(1.0, 2.0, 0.5), Some(0.0));
        assert_eq!(certify_alignment(1.5, 2.0, 0.5), None);
    }

    #[test]
    fn schedule_values() {
        assert_eq!(warm_halvings(0, 0), 4);
        assert_eq!(warm_halvings(1, 0), 8);
        assert_eq!(warm_halvings(2, 1), 14);
        assert!(default_warm_iterations(1e-8, 0.05, 1.0, 0.005) >= 5);
    }

    #[test]
    fn rejection_keeps_iterate() {
        let a = reference();
        let op = ShiftedOperator::new(&a, 1.005).unwrap().with_estimate(1.0).unwrap();
        let rule = AcceptRule::new(1.005, 1.0);
        let s = 0.5f64.sqrt();
        let x = [s, s];
        let tiny = |_: &[f64], _: &[f64]| Ok(Vector::from_vec_unchecked(vec![1e-3, 0.0]));
        let (y, ok) = robust_power_iterate(&op, &x, &rule, tiny, |v| rayleigh_quotient(&a, v)).unwrap();
        assert!(!ok);
        assert_eq!(y.as_slice(), &x);

        // norm passes, Rayleigh quotient of e₂ is 0.5 and fails
        let low = |_: &[f64], _: &[f64]| Ok(Vector::from_vec_unchecked(vec![0.0, 1e3]));
        let (y, ok) = robust_power_iterate(&op, &x, &rule, low, |v| rayleigh_quotient(&a, v)).unwrap();
        assert!(!ok);
        assert_eq!(y.as_slice(), &x);
    }

    #[test]
    fn exact_solves_are_accepted() {
        let a = reference();
        let op = ShiftedOperator::new(&a, 1.005).unwrap().with_estimate(1.0).unwrap();
        let rule = AcceptRule::new(1.005, 1.0);
        let cg = ConjugateGradientSolver::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut x = vec![0.99, (1.0f64 - 0.99 * 0.99).sqrt()];
        for _ in 0..3 {
            let (y, ok) = robust_power_iterate(
                &op,
                &x,
                &rule,
                |b, init| Ok(cg.solve(&op, b, init, 1, &mut rng)?.0),
                |v| rayleigh_quotient(&a, v),
            )
            .unwrap();
            assert!(ok);
            x = y.into_inner();
        }
        assert!(x[1].abs() < 1e-5);
    }

    #[test]
    fn offline_reference() {
        let a = reference();
        let cfg = PowerConfig {
            target_epsilon: 1e-8,
            ..PowerConfig::practical()
        };
        let r = top_eigenvector_offline(&a, &cfg).unwrap();
        assert!(r.rayleigh >= 1.0 - 1e-8, "{r:?}");
        assert!((r.vector[0].abs() - 1.0).abs() < 1e-4);
        assert!((norm(&r.vector) - 1.0).abs() < 1e-12);
    }
}
