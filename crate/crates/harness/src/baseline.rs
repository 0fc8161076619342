//! Plain power iteration on `AᵀA`, the comparison point for bench tables.

use rand::Rng;
use shiftinvert::vector::{norm, Vector};
use shiftinvert::power::PowerReport;
use shiftinvert::{gram_apply, random_unit_init, rayleigh_quotient, DataMatrix, EigenResult64};

use crate::error::{HarnessError, Result};

/// `iterations` steps of `x ← AᵀAx/‖AᵀAx‖` from a random unit start.
pub fn baseline_power_method<R: Rng + ?Sized>(a: &DataMatrix, iterations: usize, rng: &mut R) -> Result<EigenResult64> {
    let x0 = random_unit_init::<f64, _>(a.d(), rng)?;
    baseline_power_method_from(a, x0.as_slice(), iterations)
}

/// Work counts `2·nnz + d` per step, one row pass each way plus the
/// normalization.
pub fn baseline_power_method_from(a: &DataMatrix, x0: &[f64], iterations: usize) -> Result<EigenResult64> {
    if iterations == 0 {
        return Err(HarnessError::usage("baseline needs at least one iteration"));
    }
    let mut x = Vector::new(x0.to_vec())?.normalized()?;
    let mut report = PowerReport::default();
    for _ in 0..iterations {
        let y = gram_apply(a, &x)?;
        let n = norm(&y);
        if n == 0.0 {
            return Err(shiftinvert::Error::ZeroVector.into());
        }
        x = Vector::new(y.iter().map(|v| v / n).collect())?;
        report.solver.row_accesses += 2 * a.n() as u64;
        report.solver.work += (2 * a.nnz() + a.d()) as u64;
    }
    report.warm_iterations = iterations;
    let rayleigh = rayleigh_quotient(a, &x)?;
    Ok(EigenResult64 {
        vector: x,
        rayleigh,
        alignment_lower_bound: None,
        shift_used: 0.0,
        lambda1_estimate: rayleigh,
        gap_estimate: 0.0,
        shift_search: None,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use shiftinvert::vector::dot;

    #[test]
    fn tangent_halves_on_reference() {
        let a = DataMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 0.5f64.sqrt())]).unwrap();
        let h = 0.5f64.sqrt();
        for t in 1..12 {
            let r = baseline_power_method_from(&a, &[h, h], t).unwrap();
            let x = r.vector.as_slice();
            assert!((x[1] / x[0] - 0.5f64.powi(t as i32)).abs() < 1e-14);
        }
    }

    #[test]
    fn rank_one_converges_in_one_step() {
        let u = [0.6, 0.8];
        let rows: Vec<Vec<f64>> = [1.0, -2.0, 0.5].iter().map(|s| u.iter().map(|v| s * v).collect()).collect();
        let a = DataMatrix::from_dense_rows(&rows).unwrap();
        let r = baseline_power_method_from(&a, &[1.0, 0.0], 1).unwrap();
        assert!((dot(r.vector.as_slice(), &u).abs() - 1.0).abs() < 1e-14);
        assert_eq!(r.report.solver.work, (2 * a.nnz() + 2) as u64);
    }
}
