use crate::error::{LabError, Result};

/// Tridiagonal system `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
///
/// `lower[0]` and `upper[n-1]` are ignored. Solved in place by the Thomas
/// algorithm; the solution overwrites `rhs`. `diag` is used as scratch.
pub fn solve_in_place(lower: &[f64], diag: &mut [f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if n == 0 || lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(LabError::Internal("tridiagonal system has inconsistent sizes".into()));
    }
    for i in 1..n {
        let pivot = diag[i - 1];
        if pivot.abs() < f64::MIN_POSITIVE {
            return Err(LabError::Internal(format!("zero pivot in tridiagonal solve at row {}", i - 1)));
        }
        let factor = lower[i] / pivot;
        diag[i] -= factor * upper[i - 1];
        rhs[i] -= factor * rhs[i - 1];
    }
    if diag[n - 1].abs() < f64::MIN_POSITIVE {
        return Err(LabError::Internal("zero pivot in tridiagonal solve at last row".into()));
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    }
    if rhs.iter().any(|x| !x.is_finite()) {
        return Err(LabError::Internal("non-finite value in tridiagonal solution".into()));
    }
    Ok(())
}
