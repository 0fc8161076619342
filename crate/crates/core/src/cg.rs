//! Conjugate gradient on `B = λI − AᵀA`. Used as the near-exact inner solve
//! of the shift search and as a deterministic reference solver.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ShiftedOperator;
use crate::scalar::Scalar;
use crate::svrg::{ShiftedSolver, SolverReport};
use crate::vector::{axpy, check_len, dot, norm, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgConfig {
    /// Stop once `‖Bx − b‖ ≤ rel_tol·‖b‖`.
    pub rel_tol: f64,
    /// Iteration cap; `None` means `10·d + 100`.
    pub max_iterations: Option<usize>,
}

impl Default for CgConfig {
    fn default() -> Self {
        CgConfig {
            rel_tol: 1e-12,
            max_iterations: None,
        }
    }
}

/// Solves `Bx = b` from `x0`. A non-positive curvature `pᵀBp ≤ 0` means the
/// shift is not above `λ₁` and is reported as an invalid shift.
pub fn conjugate_gradient<T: Scalar>(
    op: &ShiftedOperator<'_, T>,
    b: &[T],
    x0: &[T],
    cfg: &CgConfig,
) -> Result<(Vector<T>, usize)> {
    let d = op.dim();
    check_len(b, d)?;
    check_len(x0, d)?;
    let b_norm = norm(b);
    if b_norm == T::zero() {
        return Ok((Vector::zeros(d), 0));
    }
    let tol = T::lit(cfg.rel_tol) * b_norm;
    let cap = cfg.max_iterations.unwrap_or(10 * d + 100);

    let mut x = x0.to_vec();
    let bx = op.apply(&x)?;
    let mut r: Vec<T> = b.iter().zip(bx.iter()).map(|(&u, &v)| u - v).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for k in 0..cap {
        if rr.sqrt() <= tol {
            return Ok((Vector::from_vec_unchecked(x), k));
        }
        let bp = op.apply(&p)?;
        let curvature = dot(&p, &bp);
        if !(curvature > T::zero()) {
            return Err(Error::InvalidShift {
                shift: op.shift().to_f64_lossy(),
                detail: format!("non-positive curvature {curvature} in conjugate gradient"),
            });
        }
        let alpha = rr / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &bp, &mut r);
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        for (pj, &rj) in p.iter_mut().zip(&r) {
            *pj = rj + beta * *pj;
        }
        rr = rr_next;
    }
    // the recursive residual drifts; confirm with a true residual
    let true_res = op.residual_norm(&x, b)?;
    if true_res <= tol * T::lit(10.0) {
        return Ok((Vector::from_vec_unchecked(x), cap));
    }
    Err(Error::NotConverged(format!(
        "conjugate gradient residual {} after {cap} iterations",
        (true_res / b_norm).to_f64_lossy()
    )))
}

/// CG as a [`ShiftedSolver`]; `halvings` is ignored, the tolerance is fixed.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConjugateGradientSolver {
    pub cfg: CgConfig,
}

impl<T: Scalar> ShiftedSolver<T> for ConjugateGradientSolver {
    fn solve(
        &self,
        op: &ShiftedOperator<'_, T>,
        b: &[T],
        x_init: &[T],
        _halvings: u32,
        _rng: &mut dyn RngCore,
    ) -> Result<(Vector<T>, SolverReport)> {
        let (x, iters) = conjugate_gradient(op, b, x_init, &self.cfg)?;
        let a = op.matrix();
        let report = SolverReport {
            full_gradient_count: iters as u64 + 1,
            row_accesses: 2 * a.n() as u64 * (iters as u64 + 1),
            work: (2 * a.nnz() + a.d()) as u64 * (iters as u64 + 1),
            final_b_norm_residual_proxy: op.residual_norm(&x, b)?.to_f64_lossy(),
            ..SolverReport::default()
        };
        Ok((x, report))
    }
}
