use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves the dense `n×n` system `a·x = rhs` (row-major `a`) by LU with
/// partial pivoting. `row` tags the error for diagnostics.
pub(crate) fn solve_dense(n: usize, a: &[f64], rhs: &[f64], row: usize) -> Result<Vec<f64>> {
    if n == 1 {
        let d = a[0];
        if d == 0.0 || !d.is_finite() {
            return Err(Error::Singular { row, condition: f64::INFINITY });
        }
        return Ok(vec![rhs[0] / d]);
    }
    let m = DMatrix::from_row_slice(n, n, a);
    let lu = m.clone().lu();
    let x = lu
        .solve(&DVector::from_column_slice(rhs))
        .ok_or(Error::Singular { row, condition: f64::INFINITY })?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { row, condition: condition_estimate(&m) });
    }
    Ok(x.iter().copied().collect())
}

/// Ratio of extreme singular values; infinite for a rank-deficient matrix.
pub(crate) fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let (max, min) = sv.iter().fold((0.0f64, f64::INFINITY), |(hi, lo), &s| (hi.max(s), lo.min(s)));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
