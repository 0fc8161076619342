//! Shift search: repeated two-vector block power estimates on
//! `(λ̄I − AᵀA)⁻¹`, moving `λ̄` halfway towards `λ₁` each round until the top
//! two estimates separate.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::cg::{conjugate_gradient, CgConfig};
use crate::error::{Error, Result};
use crate::matrix::{gram_apply, CsrMatrix, SamplingDistribution, ShiftedOperator};
use crate::scalar::Scalar;
use crate::svrg::{solve_shifted_system, SvrgConfig};
use crate::vector::{dot, gaussian_vector, norm, norm_sq, Vector};

/// One round of the search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftIterate {
    pub lambda_bar: f64,
    pub lambda_tilde_1: f64,
    pub lambda_tilde_2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSearchResult {
    pub lambda_bar: f64,
    pub lambda_tilde_1: f64,
    pub lambda_tilde_2: f64,
    pub iterations: usize,
    /// Entry 0 is the initial estimate on `AᵀA`.
    pub history: Vec<ShiftIterate>,
    /// Operator applications per block estimate.
    pub power_steps: usize,
}

impl ShiftSearchResult {
    /// `(λ̃₁ − λ̃₂)/λ̃₁`
    pub fn gap_estimate(&self) -> f64 {
        (self.lambda_tilde_1 - self.lambda_tilde_2) / self.lambda_tilde_1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftConfig {
    /// Accuracy parameter; the block estimates are within `λ₃/α`.
    pub alpha: f64,
    /// Power steps `t = ⌈c·α·ln d⌉`.
    pub c: f64,
    pub max_iterations: usize,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        ShiftConfig {
            alpha: 200.0,
            c: 8.0,
            max_iterations: Self::budget_for_gap(1e-6),
        }
    }
}

impl ShiftConfig {
    /// `⌈log₂(10/gap)⌉ + 1`, the iteration count guaranteed to suffice.
    pub fn budget_for_gap(gap: f64) -> usize {
        (10.0 / gap).log2().ceil() as usize + 1
    }

    pub fn power_steps(&self, d: usize) -> usize {
        ((self.c * self.alpha * (d as f64).ln()).ceil() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0) {
            return Err(Error::config("alpha must exceed 1"));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::config("power step constant c must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Orthonormalizes two columns in place by modified Gram–Schmidt. Returns
/// `false` when the second column is numerically dependent on the first.
fn mgs2<T: Scalar>(u: &mut [T], v: &mut [T]) -> bool {
    let nu = norm(u);
    if !(nu > T::zero()) || !nu.is_finite() {
        return false;
    }
    u.iter_mut().for_each(|x| *x = *x / nu);
    let nv_before = norm(v);
    let proj = dot(u, v);
    for (vj, &uj) in v.iter_mut().zip(u.iter()) {
        *vj = *vj - proj * uj;
    }
    let nv = norm(v);
    if !(nv > T::lit(1e-13) * nv_before) || !nv.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x = *x / nv);
    true
}

fn block_once<T, F, R>(apply: &mut F, d: usize, t: usize, rng: &mut R) -> Result<Option<(T, T)>>
where
    T: Scalar,
    F: FnMut(&[T], &mut R) -> Result<Vector<T>>,
    R: Rng + ?Sized,
{
    let mut u: Vec<T> = gaussian_vector(d, rng);
    let mut v: Vec<T> = gaussian_vector(d, rng);
    if !mgs2(&mut u, &mut v) {
        return Ok(None);
    }
    let mut mu = apply(&u, rng)?.into_inner();
    let mut mv = apply(&v, rng)?.into_inner();
    for _ in 1..t {
        let (mut nu, mut nv) = (mu, mv);
        if !mgs2(&mut nu, &mut nv) {
            return Ok(None);
        }
        u = nu;
        v = nv;
        mu = apply(&u, rng)?.into_inner();
        mv = apply(&v, rng)?.into_inner();
    }
    // Rayleigh–Ritz on span{u, v}
    let h11 = dot(&u, &mu);
    let h22 = dot(&v, &mv);
    let h12 = T::lit(0.5) * (dot(&u, &mv) + dot(&v, &mu));
    let mean = T::lit(0.5) * (h11 + h22);
    let half = T::lit(0.5) * (h11 - h22);
    let rad = (half * half + h12 * h12).sqrt();
    Ok(Some((mean + rad, mean - rad)))
}

/// Top-two Ritz values of a self-adjoint operator after `t` block power
/// steps from a Gaussian `d × 2` start. Resamples once if the block loses rank.
pub fn eig_estimate_block<T, F, R>(mut apply: F, d: usize, t: usize, rng: &mut R) -> Result<(T, T)>
where
    T: Scalar,
    F: FnMut(&[T], &mut R) -> Result<Vector<T>>,
    R: Rng + ?Sized,
{
    if d < 2 {
        return Err(Error::config("block estimate needs dimension at least 2"));
    }
    if t == 0 {
        return Err(Error::config("at least one power step is required"));
    }
    for _ in 0..2 {
        if let Some(pair) = block_once(&mut apply, d, t, rng)? {
            return Ok(pair);
        }
    }
    Err(Error::RankDeficientBlock)
}

/// Applies `(λ̄I − AᵀA)⁻¹` for the shift search.
pub trait ShiftInverse<T: Scalar> {
    fn apply(
        &self,
        a: &CsrMatrix<T>,
        shift: T,
        lambda1_estimate: T,
        w: &[T],
        rng: &mut dyn RngCore,
    ) -> Result<Vector<T>>;
}

/// Near-exact inverse by conjugate gradient.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConjugateGradientShiftInverse {
    pub cfg: CgConfig,
}

impl<T: Scalar> ShiftInverse<T> for ConjugateGradientShiftInverse {
    fn apply(
        &self,
        a: &CsrMatrix<T>,
        shift: T,
        _lambda1_estimate: T,
        w: &[T],
        _rng: &mut dyn RngCore,
    ) -> Result<Vector<T>> {
        let op = ShiftedOperator::new(a, shift)?;
        let x0 = vec![T::zero(); a.d()];
        Ok(conjugate_gradient(&op, w, &x0, &self.cfg)?.0)
    }
}

/// Inverse by SVRG halvings from the scaled warm start `w·(wᵀw)/(wᵀBw)`.
#[derive(Debug, Clone)]
pub struct SvrgShiftInverse<T> {
    pub cfg: SvrgConfig,
    /// 54 halvings bring the squared B-norm error below `2⁻⁵⁴`, a relative
    /// B-norm tolerance of about `1e-8`.
    pub halvings: u32,
    dist: SamplingDistribution<T>,
}

impl<T: Scalar> SvrgShiftInverse<T> {
    pub fn new(a: &CsrMatrix<T>, cfg: SvrgConfig) -> Result<Self> {
        Ok(SvrgShiftInverse {
            cfg,
            halvings: 54,
            dist: SamplingDistribution::from_matrix(a)?,
        })
    }
}

impl<T: Scalar> ShiftInverse<T> for SvrgShiftInverse<T> {
    fn apply(
        &self,
        a: &CsrMatrix<T>,
        shift: T,
        lambda1_estimate: T,
        w: &[T],
        rng: &mut dyn RngCore,
    ) -> Result<Vector<T>> {
        let op = ShiftedOperator::new(a, shift)?.with_estimate(lambda1_estimate)?;
        let q = op.quadratic_form(w)?;
        if !(q > T::zero()) {
            return Err(Error::NonPositiveQuadraticForm(q.to_f64_lossy()));
        }
        let scale = norm_sq(w) / q;
        let x0: Vec<T> = w.iter().map(|&v| v * scale).collect();
        Ok(solve_shifted_system(&op, w, &x0, self.halvings, &self.cfg, &self.dist, rng)?.0)
    }
}

/// Returns `λ̄` with `(1 + gap/120)λ₁ ≤ λ̄ ≤ (1 + gap/8)λ₁` with high
/// probability. The loop exits as soon as
/// `λ̄ᵢ − λ̃ᵢ,₁ < (λ̄ᵢ − λ̃ᵢ,₂)/10`.
pub fn estimate_shift<T, S, R>(a: &CsrMatrix<T>, cfg: &ShiftConfig, inner: &S, rng: &mut R) -> Result<ShiftSearchResult>
where
    T: Scalar,
    S: ShiftInverse<T> + ?Sized,
    R: RngCore,
{
    cfg.validate()?;
    if a.frob_sq() <= T::zero() {
        return Err(Error::ZeroMatrix);
    }
    let d = a.d();
    let t = cfg.power_steps(d);

    let (l1, l2) = eig_estimate_block(|x: &[T], _: &mut R| gram_apply(a, x), d, t, rng)?;
    let mut lambda_bar = T::lit(1.5) * l1;
    let mut tilde = (l1, l2);
    let mut history = vec![record(lambda_bar, l1, l2)];

    for i in 1..=cfg.max_iterations {
        let prev = lambda_bar;
        // the previous top estimate always lies strictly below λ̄ᵢ₋₁
        let l1_est = tilde.0;
        let (h1, h2) = eig_estimate_block(
            |x: &[T], r: &mut R| inner.apply(a, prev, l1_est, x, r),
            d,
            t,
            rng,
        )?;
        if !(h1 > T::zero() && h2 > T::zero()) {
            return Err(Error::InvalidShift {
                shift: prev.to_f64_lossy(),
                detail: format!("inverse estimates ({h1}, {h2}) are not positive"),
            });
        }
        tilde = (prev - T::one() / h1, prev - T::one() / h2);
        lambda_bar = T::lit(0.5) * (tilde.0 + prev);
        history.push(record(lambda_bar, tilde.0, tilde.1));
        if lambda_bar - tilde.0 < T::lit(0.1) * (lambda_bar - tilde.1) {
            return Ok(ShiftSearchResult {
                lambda_bar: lambda_bar.to_f64_lossy(),
                lambda_tilde_1: tilde.0.to_f64_lossy(),
                lambda_tilde_2: tilde.1.to_f64_lossy(),
                iterations: i,
                history,
                power_steps: t,
            });
        }
    }
    Err(Error::GapTooSmall {
        iterations: cfg.max_iterations,
    })
}

fn record<T: Scalar>(lambda_bar: T, l1: T, l2: T) -> ShiftIterate {
    ShiftIterate {
        lambda_bar: lambda_bar.to_f64_lossy(),
        lambda_tilde_1: l1.to_f64_lossy(),
        lambda_tilde_2: l2.to_f64_lossy(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(entries: &[f64]) -> CsrMatrix<f64> {
        let t: Vec<_> = entries.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        CsrMatrix::from_triplets(entries.len(), entries.len(), &t).unwrap()
    }

    #[test]
    fn block_on_identity_and_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let id = |x: &[f64], _: &mut ChaCha8Rng| Ok(Vector::from_vec_unchecked(x.to_vec()));
        let (a, b) = eig_estimate_block(id, 5, 3, &mut rng).unwrap();
        assert!((a - 1.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);

        let m = |x: &[f64], _: &mut ChaCha8Rng| Ok(Vector::from_vec_unchecked(vec![x[0], 0.5 * x[1]]));
        let (a, b) = eig_estimate_block(m, 2, 200, &mut rng).unwrap();
        assert!((a - 1.0).abs() < 1e-6 && (b - 0.5).abs() < 1e-6);
    }

    #[test]
    fn rank_loss_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rank_one = |x: &[f64], _: &mut ChaCha8Rng| Ok(Vector::from_vec_unchecked(vec![x[0] + x[1], 0.0, 0.0]));
        assert!(matches!(
            eig_estimate_block(rank_one, 3, 3, &mut rng),
            Err(Error::RankDeficientBlock)
        ));
        let one_d = |x: &[f64], _: &mut ChaCha8Rng| Ok(Vector::from_vec_unchecked(x.to_vec()));
        assert!(eig_estimate_block(one_d, 1, 3, &mut rng).is_err());
    }

    #[test]
    fn reference_band() {
        let a = diag(&[1.0, 0.5f64.sqrt()]);
        let cfg = ShiftConfig::default();
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = estimate_shift(&a, &cfg, &ConjugateGradientShiftInverse::default(), &mut rng).unwrap();
            assert!(r.lambda_bar >= 1.0 + 0.5 / 120.0 && r.lambda_bar <= 1.0 + 0.5 / 8.0, "{r:?}");
            assert!(r.iterations <= ShiftConfig::budget_for_gap(0.5));
            assert!(r.lambda_bar > r.lambda_tilde_1 && r.lambda_tilde_1 >= r.lambda_tilde_2);
        }
    }

    #[test]
    fn equal_top_eigenvalues_exhaust_budget() {
        let a = diag(&[1.0, 1.0, 0.5]);
        let cfg = ShiftConfig {
            c: 0.1,
            max_iterations: 20,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = estimate_shift(&a, &cfg, &ConjugateGradientShiftInverse::default(), &mut rng);
        assert!(matches!(r, Err(Error::GapTooSmall { iterations: 20 })), "{r:?}");
    }
}
