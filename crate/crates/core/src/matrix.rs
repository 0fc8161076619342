//! Sparse row storage, the implicit shifted operator `λI − AᵀA`, and the
//! row-norm sampling distribution used by the stochastic solvers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vector::{check_finite, check_len, norm_sq, Vector};
#[cfg(feature = "diagnostics")]
use crate::vector::{axpy, dot};

/// Compressed sparse row matrix with cached row norms.
///
/// Rows are the sampling unit of the SVRG solvers, so the layout is row-major.
/// Zero rows are allowed; they receive zero sampling probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct CsrMatrix<T> {
    n: usize,
    d: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<T>,
    row_sq_norms: Vec<T>,
    frob_sq: T,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds from raw CSR arrays after validating the structure.
    pub fn from_raw(
        n: usize,
        d: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        if row_offsets.len() != n + 1 {
            return Err(Error::InvalidStructure(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                n + 1
            )));
        }
        if row_offsets[0] != 0 {
            return Err(Error::InvalidStructure("row_offsets must start at 0".into()));
        }
        if row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidStructure("row_offsets must be non-decreasing".into()));
        }
        if row_offsets[n] != values.len() || values.len() != col_indices.len() {
            return Err(Error::InvalidStructure(format!(
                "row_offsets[n] = {}, values = {}, col_indices = {}",
                row_offsets[n],
                values.len(),
                col_indices.len()
            )));
        }
        if let Some(&c) = col_indices.iter().find(|&&c| c >= d) {
            return Err(Error::InvalidStructure(format!(
                "column index {c} out of range for {d} columns"
            )));
        }
        check_finite(&values)?;

        let row_sq_norms: Vec<T> = (0..n)
            .map(|i| norm_sq(&values[row_offsets[i]..row_offsets[i + 1]]))
            .collect();
        let frob_sq = row_sq_norms.iter().copied().sum();
        Ok(CsrMatrix {
            n,
            d,
            row_offsets,
            col_indices,
            values,
            row_sq_norms,
            frob_sq,
        })
    }

    /// Builds from `(row, col, value)` triplets in any order. Duplicate
    /// coordinates are rejected; explicit zeros are kept as stored entries.
    pub fn from_triplets(n: usize, d: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, T)> = triplets.to_vec();
        for &(i, j, _) in &sorted {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            if j >= d {
                return Err(Error::IndexOutOfRange { index: j, len: d });
            }
        }
        sorted.sort_by_key(|&(i, j, _)| (i, j));
        if let Some(w) = sorted.windows(2).find(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1) {
            return Err(Error::InvalidStructure(format!(
                "duplicate entry at ({}, {})",
                w[0].0, w[0].1
            )));
        }

        let mut row_offsets = vec![0usize; n + 1];
        for &(i, _, _) in &sorted {
            row_offsets[i + 1] += 1;
        }
        for i in 0..n {
            row_offsets[i + 1] += row_offsets[i];
        }
        let col_indices = sorted.iter().map(|t| t.1).collect();
        let values = sorted.iter().map(|t| t.2).collect();
        Self::from_raw(n, d, row_offsets, col_indices, values)
    }

    /// Builds from dense rows, storing only the non-zero entries.
    pub fn from_dense_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.len());
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for row in rows {
            check_len(row, d)?;
            for (j, &v) in row.iter().enumerate() {
                if v != T::zero() {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        Self::from_raw(n, d, row_offsets, col_indices, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn row_sq_norms(&self) -> &[T] {
        &self.row_sq_norms
    }

    /// `‖A‖_F²`
    pub fn frob_sq(&self) -> T {
        self.frob_sq
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[s..e], &self.values[s..e])
    }

    #[inline]
    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    /// `aᵢᵀx`
    #[inline]
    pub fn row_dot(&self, i: usize, x: &[T]) -> T {
        let (cols, vals) = self.row(i);
        cols.iter()
            .zip(vals)
            .fold(T::zero(), |acc, (&j, &v)| acc + v * x[j])
    }

    /// `y += alpha * aᵢ`
    #[inline]
    pub fn add_row_scaled(&self, i: usize, alpha: T, y: &mut [T]) {
        let (cols, vals) = self.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            y[j] = y[j] + alpha * v;
        }
    }

    /// `Ax`
    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(x, self.d)?;
        Ok((0..self.n).map(|i| self.row_dot(i, x)).collect())
    }

    /// `Aᵀy`
    pub fn mul_t_vec(&self, y: &[T]) -> Result<Vec<T>> {
        check_len(y, self.n)?;
        let mut out = vec![T::zero(); self.d];
        for (i, &yi) in y.iter().enumerate() {
            if yi != T::zero() {
                self.add_row_scaled(i, yi, &mut out);
            }
        }
        Ok(out)
    }

    /// Stable rank `‖A‖_F² / λ₁` for a supplied estimate of `λ₁(AᵀA)`.
    pub fn stable_rank(&self, lambda1: T) -> T {
        self.frob_sq / lambda1
    }

    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            out.extend(cols.iter().zip(vals).map(|(&j, &v)| (i, j, v)));
        }
        out
    }

    pub fn to_dense_rows(&self) -> Vec<Vec<T>> {
        let mut rows = vec![vec![T::zero(); self.d]; self.n];
        for (i, j, v) in self.triplets() {
            rows[i][j] = v;
        }
        rows
    }
}

/// `AᵀAx` computed as `Aᵀ(Ax)`; the Gram matrix is never formed.
pub fn gram_apply<T: Scalar>(a: &CsrMatrix<T>, x: &[T]) -> Result<Vector<T>> {
    let ax = a.mul_vec(x)?;
    Ok(Vector::from_vec_unchecked(a.mul_t_vec(&ax)?))
}

/// `xᵀAᵀAx / xᵀx`
pub fn rayleigh_quotient<T: Scalar>(a: &CsrMatrix<T>, x: &[T]) -> Result<T> {
    let ax = a.mul_vec(x)?;
    let xx = norm_sq(x);
    if xx == T::zero() {
        return Err(Error::ZeroVector);
    }
    Ok(norm_sq(&ax) / xx)
}

/// The implicit positive definite matrix `B = λI − AᵀA`.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedOperator<'a, T> {
    matrix: &'a CsrMatrix<T>,
    shift: T,
    lambda1_estimate: Option<T>,
}

impl<'a, T: Scalar> ShiftedOperator<'a, T> {
    pub fn new(matrix: &'a CsrMatrix<T>, shift: T) -> Result<Self> {
        if !shift.is_finite() || shift <= T::zero() {
            return Err(Error::InvalidShift {
                shift: shift.to_f64_lossy(),
                detail: "shift must be positive and finite".into(),
            });
        }
        Ok(ShiftedOperator {
            matrix,
            shift,
            lambda1_estimate: None,
        })
    }

    /// Attaches an estimate of `λ₁`; positive definiteness requires `λ > λ̂₁`.
    pub fn with_estimate(mut self, lambda1: T) -> Result<Self> {
        if !(self.shift > lambda1) {
            return Err(Error::InvalidShift {
                shift: self.shift.to_f64_lossy(),
                detail: format!("shift must exceed the top eigenvalue estimate {lambda1}"),
            });
        }
        self.lambda1_estimate = Some(lambda1);
        Ok(self)
    }

    pub fn matrix(&self) -> &'a CsrMatrix<T> {
        self.matrix
    }

    pub fn shift(&self) -> T {
        self.shift
    }

    pub fn lambda1_estimate(&self) -> Option<T> {
        self.lambda1_estimate
    }

    pub fn dim(&self) -> usize {
        self.matrix.d()
    }

    /// Strong convexity estimate `μ̂ = λ − λ̂₁`.
    pub fn mu_estimate(&self) -> Result<T> {
        self.lambda1_estimate
            .map(|l1| self.shift - l1)
            .ok_or(Error::MissingEigenvalueEstimate)
    }

    /// `λx − AᵀAx`
    pub fn apply(&self, x: &[T]) -> Result<Vector<T>> {
        let mut out = gram_apply(self.matrix, x)?.into_inner();
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = self.shift * xi - *o;
        }
        Ok(Vector::from_vec_unchecked(out))
    }

    /// `xᵀBx = λ‖x‖² − ‖Ax‖²`
    pub fn quadratic_form(&self, x: &[T]) -> Result<T> {
        let ax = self.matrix.mul_vec(x)?;
        Ok(self.shift * norm_sq(x) - norm_sq(&ax))
    }

    /// `‖x‖_B = √(xᵀBx)`; a negative form means `λ ≤ λ₁`.
    pub fn b_norm(&self, x: &[T]) -> Result<T> {
        let q = self.quadratic_form(x)?;
        if q < T::zero() {
            return Err(Error::InvalidShift {
                shift: self.shift.to_f64_lossy(),
                detail: format!("negative quadratic form {q}; shift is below the top eigenvalue"),
            });
        }
        Ok(q.sqrt())
    }

    /// `‖Bx − b‖₂`
    pub fn residual_norm(&self, x: &[T], b: &[T]) -> Result<T> {
        check_len(b, self.dim())?;
        let bx = self.apply(x)?;
        Ok(bx
            .iter()
            .zip(b)
            .map(|(&u, &v)| (u - v) * (u - v))
            .sum::<T>()
            .sqrt())
    }
}

/// `λx − AᵀAx` as a free function.
pub fn shifted_apply<T: Scalar>(op: &ShiftedOperator<'_, T>, x: &[T]) -> Result<Vector<T>> {
    op.apply(x)
}

pub fn b_norm<T: Scalar>(op: &ShiftedOperator<'_, T>, x: &[T]) -> Result<T> {
    op.b_norm(x)
}

/// The potential `G(x) = ‖P_{v₁⊥}x‖_B / ‖P_{v₁}x‖_B`, measuring the B-norm
/// tangent of the angle between `x` and the true top eigenvector `v1`.
///
/// Needs the true `v1`, so it is only available for instrumentation.
#[cfg(feature = "diagnostics")]
pub fn potential<T: Scalar>(op: &ShiftedOperator<'_, T>, v1: &[T], x: &[T]) -> Result<T> {
    check_len(v1, op.dim())?;
    check_len(x, op.dim())?;
    let along = dot(v1, x);
    if along == T::zero() {
        return Err(Error::OrthogonalToTopEigenvector);
    }
    let lambda1 = rayleigh_quotient(op.matrix(), v1)?;
    let mut perp = x.to_vec();
    axpy(-along, v1, &mut perp);
    let num = op.quadratic_form(&perp)?.max(T::zero()).sqrt();
    let mu = op.shift() - lambda1;
    if mu <= T::zero() {
        return Err(Error::InvalidShift {
            shift: op.shift().to_f64_lossy(),
            detail: "shift does not exceed the top eigenvalue".into(),
        });
    }
    Ok(num / (along.abs() * mu.sqrt()))
}

/// Importance sampling distribution over rows, `pᵢ = ‖aᵢ‖² / ‖A‖_F²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDistribution<T> {
    probabilities: Vec<T>,
    cumulative: Vec<T>,
}

impl<T: Scalar> SamplingDistribution<T> {
    pub fn from_matrix(a: &CsrMatrix<T>) -> Result<Self> {
        let frob = a.frob_sq();
        if frob <= T::zero() {
            return Err(Error::ZeroMatrix);
        }
        Self::from_weights(a.row_sq_norms())
            .map(|mut dist| {
                // exact zeros for zero rows, matching the row norm cache
                for (p, &w) in dist.probabilities.iter_mut().zip(a.row_sq_norms()) {
                    if w == T::zero() {
                        *p = T::zero();
                    }
                }
                dist
            })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: &[T]) -> Result<Self> {
        if weights.iter().any(|&w| w < T::zero() || !w.is_finite()) {
            return Err(Error::config("sampling weights must be finite and non-negative"));
        }
        let total: T = weights.iter().copied().sum();
        if total <= T::zero() {
            return Err(Error::ZeroMatrix);
        }
        let probabilities: Vec<T> = weights.iter().map(|&w| w / total).collect();
        let mut acc = T::zero();
        let cumulative = probabilities
            .iter()
            .map(|&p| {
                acc = acc + p;
                acc
            })
            .collect();
        Ok(SamplingDistribution {
            probabilities,
            cumulative,
        })
    }

    pub fn probabilities(&self) -> &[T] {
        &self.probabilities
    }

    #[inline]
    pub fn probability(&self, i: usize) -> T {
        self.probabilities[i]
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Inverse-CDF draw by binary search; never returns a zero-probability index.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty distribution");
        let u = T::lit(rng.random::<f64>()) * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        if idx < self.probabilities.len() {
            idx
        } else {
            // u landed on the rounding tail; fall back to the last supported row
            self.probabilities
                .iter()
                .rposition(|&p| p > T::zero())
                .expect("distribution has positive mass")
        }
    }
}

pub fn build_sampling_distribution<T: Scalar>(a: &CsrMatrix<T>) -> Result<SamplingDistribution<T>> {
    SamplingDistribution::from_matrix(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::norm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reference() -> CsrMatrix<f64> {
        CsrMatrix::from_dense_rows(&[vec![1.0, 0.0], vec![0.0, 0.5f64.sqrt()]]).unwrap()
    }

    #[test]
    fn structure_validation() {
        assert!(CsrMatrix::<f64>::from_raw(2, 2, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::<f64>::from_raw(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        assert!(CsrMatrix::<f64>::from_raw(1, 2, vec![0, 2], vec![0], vec![1.0]).is_err());
        assert!(CsrMatrix::<f64>::from_raw(1, 2, vec![0, 1], vec![0], vec![f64::NAN]).is_err());
        let dup = CsrMatrix::<f64>::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0)]);
        assert!(matches!(dup, Err(Error::InvalidStructure(_))));
    }

    #[test]
    fn cached_norms() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 3.0), (0, 2, 4.0), (2, 1, 1.0)]).unwrap();
        assert_eq!(a.row_sq_norms(), &[25.0, 0.0, 1.0]);
        assert_eq!(a.frob_sq(), 26.0);
        assert_eq!(a.nnz(), 3);
    }

    #[test]
    fn gram_on_reference() {
        let a = reference();
        let y = gram_apply(&a, &[1.0, 0.0]).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-15 && y[1].abs() < 1e-15);
        let z = CsrMatrix::<f64>::from_raw(2, 2, vec![0, 0, 0], vec![], vec![]).unwrap();
        assert_eq!(gram_apply(&z, &[3.0, -1.0]).unwrap().as_slice(), &[0.0, 0.0]);
        assert!(matches!(
            gram_apply(&a, &[1.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn shifted_and_norms() {
        let a = reference();
        let op = ShiftedOperator::new(&a, 1.005).unwrap();
        let y = op.apply(&[1.0, 0.0]).unwrap();
        assert!((y[0] - 0.005).abs() < 1e-15 && y[1] == 0.0);
        assert_eq!(op.apply(&[0.0, 0.0]).unwrap().as_slice(), &[0.0, 0.0]);
        assert!((op.b_norm(&[1.0, 0.0]).unwrap() - 0.005f64.sqrt()).abs() < 1e-12);
        assert_eq!(op.b_norm(&[0.0, 0.0]).unwrap(), 0.0);
        let bad = ShiftedOperator::new(&a, 0.9).unwrap();
        assert!(matches!(bad.b_norm(&[1.0, 0.0]), Err(Error::InvalidShift { .. })));
        assert!(ShiftedOperator::new(&a, 1.005).unwrap().with_estimate(1.1).is_err());
    }

    #[test]
    fn rayleigh_reference() {
        let a = reference();
        assert!((rayleigh_quotient(&a, &[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((rayleigh_quotient(&a, &[1.0, 1.0]).unwrap() - 0.75).abs() < 1e-15);
        assert!(matches!(rayleigh_quotient(&a, &[0.0, 0.0]), Err(Error::ZeroVector)));
    }

    #[test]
    fn potential_reference() {
        let a = reference();
        let op = ShiftedOperator::new(&a, 1.005).unwrap();
        let v1 = [1.0, 0.0];
        assert_eq!(potential(&op, &v1, &v1).unwrap(), 0.0);
        let s = 0.5f64.sqrt();
        let g = potential(&op, &v1, &[s, s]).unwrap();
        assert!((g - 101f64.sqrt()).abs() < 1e-9, "{g}");
        let g3 = potential(&op, &v1, &[3.0 * s, 3.0 * s]).unwrap();
        assert!((g - g3).abs() < 1e-12);
        assert!(matches!(
            potential(&op, &v1, &[0.0, 1.0]),
            Err(Error::OrthogonalToTopEigenvector)
        ));
    }

    #[test]
    fn sampling_distribution_values() {
        let a = reference();
        let p = build_sampling_distribution(&a).unwrap();
        assert!((p.probability(0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.probability(1) - 1.0 / 3.0).abs() < 1e-15);

        let uniform = CsrMatrix::<f64>::from_dense_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let p = build_sampling_distribution(&uniform).unwrap();
        assert!(p.probabilities().iter().all(|&q| (q - 1.0 / 3.0).abs() < 1e-15));

        let z = CsrMatrix::<f64>::from_raw(2, 2, vec![0, 0, 0], vec![], vec![]).unwrap();
        assert!(matches!(build_sampling_distribution(&z), Err(Error::ZeroMatrix)));
    }

    #[test]
    fn zero_rows_never_sampled() {
        let a = CsrMatrix::from_triplets(4, 2, &[(1, 0, 1.0), (3, 1, 2.0)]).unwrap();
        let p = build_sampling_distribution(&a).unwrap();
        assert_eq!(p.probability(0), 0.0);
        assert_eq!(p.probability(2), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let i = p.sample(&mut rng);
            assert!(i == 1 || i == 3);
        }
    }

    #[test]
    fn generic_over_f32() {
        let a = CsrMatrix::<f32>::from_dense_rows(&[vec![3.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let x = [1.0f32, 1.0];
        let y = gram_apply(&a, &x).unwrap();
        assert_eq!(y.as_slice(), &[9.0, 16.0]);
        assert!((norm(&y) - 337f32.sqrt()).abs() < 1e-4);
    }
}
