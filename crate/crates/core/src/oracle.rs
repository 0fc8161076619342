//! Dense reference computations for tests and the harness: a cyclic Jacobi
//! eigendecomposition of `AᵀA` and exact shifted solves by Cholesky.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::matrix::{CsrMatrix, ShiftedOperator};
use crate::scalar::Scalar;
use crate::svrg::{ShiftedSolver, SolverReport};
use crate::vector::{check_len, Vector};

/// Largest dimension the dense routines accept.
pub const MAX_DENSE_DIM: usize = 512;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues in decreasing order with matching unit eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vector<T>>,
}

impl<T: Scalar> Spectrum<T> {
    pub fn lambda1(&self) -> T {
        self.values[0]
    }

    /// `(λ₁ − λ₂)/λ₁`; zero for `d = 1` or `λ₁ = 0`.
    pub fn gap(&self) -> T {
        if self.values.len() < 2 || self.values[0] <= T::zero() {
            return T::zero();
        }
        (self.values[0] - self.values[1]) / self.values[0]
    }

    pub fn top_vector(&self) -> &Vector<T> {
        &self.vectors[0]
    }
}

/// Dense `AᵀA`, row-major.
pub fn dense_gram<T: Scalar>(a: &CsrMatrix<T>) -> Result<Vec<Vec<T>>> {
    let d = a.d();
    if d > MAX_DENSE_DIM {
        return Err(Error::config(format!("dense oracle limited to d ≤ {MAX_DENSE_DIM}")));
    }
    let mut g = vec![vec![T::zero(); d]; d];
    for i in 0..a.n() {
        let (cols, vals) = a.row(i);
        for (p, &j) in cols.iter().enumerate() {
            for (q, &k) in cols.iter().enumerate() {
                g[j][k] = g[j][k] + vals[p] * vals[q];
            }
        }
    }
    Ok(g)
}

/// Cyclic Jacobi for a symmetric matrix.
pub fn symmetric_eigen<T: Scalar>(m: &[Vec<T>]) -> Result<Spectrum<T>> {
    let d = m.len();
    if d == 0 || d > MAX_DENSE_DIM {
        return Err(Error::config(format!("dimension must lie in 1..={MAX_DENSE_DIM}")));
    }
    for row in m {
        check_len(row, d)?;
        crate::vector::check_finite(row)?;
    }
    let mut a: Vec<Vec<T>> = m.to_vec();
    let mut v: Vec<Vec<T>> = (0..d)
        .map(|i| (0..d).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    // rounding leaves an off-diagonal floor that grows with d
    let eps = T::epsilon() * T::from_usize(d).expect("dimension fits");
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        let mut total = T::zero();
        for i in 0..d {
            for j in 0..d {
                let s = a[i][j] * a[i][j];
                total = total + s;
                if i != j {
                    off = off + s;
                }
            }
        }
        if off <= eps * eps * total || off == T::zero() {
            converged = true;
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p][q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NotConverged(format!("Jacobi did not converge in {MAX_SWEEPS} sweeps")));
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).expect("finite eigenvalues"));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| Vector::from_vec_unchecked((0..d).map(|k| v[k][i]).collect()))
        .collect();
    Ok(Spectrum { values, vectors })
}

/// Full spectrum of `AᵀA`.
pub fn gram_spectrum<T: Scalar>(a: &CsrMatrix<T>) -> Result<Spectrum<T>> {
    symmetric_eigen(&dense_gram(a)?)
}

/// `(λI − AᵀA)⁻¹b` by dense Cholesky; fails unless `λI − AᵀA` is positive definite.
pub fn exact_shifted_solve<T: Scalar>(op: &ShiftedOperator<'_, T>, b: &[T]) -> Result<Vector<T>> {
    let d = op.dim();
    check_len(b, d)?;
    let mut m = dense_gram(op.matrix())?;
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if i == j { op.shift() - *v } else { -*v };
        }
    }
    let mut l = vec![vec![T::zero(); d]; d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s = s - l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return Err(Error::InvalidShift {
                        shift: op.shift().to_f64_lossy(),
                        detail: "shifted matrix is not positive definite".into(),
                    });
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![T::zero(); d];
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![T::zero(); d];
    for i in (0..d).rev() {
        let mut s = y[i];
        for k in i + 1..d {
            s = s - l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Ok(Vector::from_vec_unchecked(x))
}

/// Exact solves as a [`ShiftedSolver`]; `halvings` is ignored.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExactSolver;

impl<T: Scalar> ShiftedSolver<T> for ExactSolver {
    fn solve(
        &self,
        op: &ShiftedOperator<'_, T>,
        b: &[T],
        _x_init: &[T],
        _halvings: u32,
        _rng: &mut dyn RngCore,
    ) -> Result<(Vector<T>, SolverReport)> {
        let x = exact_shifted_solve(op, b)?;
        Ok((x, SolverReport::default()))
    }
}
