use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative size of the one-shot Tikhonov fallback, scaled by `trace / p`.
pub const TIKHONOV_SCALE: f64 = 1e-8;

/// Solves the symmetric positive (semi-)definite system `H x = b` by
/// Cholesky, retrying once with `H + 1e-8 * trace(H) / p * I` if the
/// factorization fails.
pub fn solve_spd(hessian: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let p = hessian.nrows();
    if hessian.ncols() != p || rhs.len() != p {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} system with {} right-hand side entries",
            p,
            hessian.ncols(),
            rhs.len()
        )));
    }
    if let Some(chol) = hessian.clone().cholesky() {
        let x = chol.solve(rhs);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    let trace = hessian.trace();
    if !(trace > 0.0) || !trace.is_finite() {
        return Err(Error::RankDeficient);
    }
    let lambda = TIKHONOV_SCALE * trace / p as f64;
    let mut damped = hessian.clone();
    for i in 0..p {
        damped[(i, i)] += lambda;
    }
    let x = damped.cholesky().ok_or(Error::RankDeficient)?.solve(rhs);
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::RankDeficient)
    }
}

/// Least-squares step `(J^T J)^-1 J^T e` for a row-major `rows x p` Jacobian.
pub fn solve_normal_equations(jacobian: &[f64], p: usize, residuals: &[f64]) -> Result<Vec<f64>> {
    if p == 0 || jacobian.len() != residuals.len() * p {
        return Err(Error::ShapeMismatch(format!(
            "jacobian of {} entries for {} residuals and {p} parameters",
            jacobian.len(),
            residuals.len()
        )));
    }
    let mut h = DMatrix::zeros(p, p);
    let mut b = DVector::zeros(p);
    for (row, &e) in jacobian.chunks_exact(p).zip(residuals) {
        for i in 0..p {
            b[i] += row[i] * e;
            for j in i..p {
                h[(i, j)] += row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            h[(i, j)] = h[(j, i)];
        }
    }
    Ok(solve_spd(&h, &b)?.iter().copied().collect())
}
