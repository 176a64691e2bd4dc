//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Smallest eigenvalue of the symmetric part `(M + Mᵀ)/2`.
pub fn min_sym_eigenvalue(m: &Matrix) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// Largest eigenvalue of the symmetric part `(M + Mᵀ)/2`.
pub fn max_sym_eigenvalue(m: &Matrix) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.max()
}

/// Euclidean operator norm (largest singular value).
pub fn operator_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Solves `A x = b` for square nonsingular `A`.
pub fn solve(a: &Matrix, b: &Vector, what: &'static str) -> Result<Vector> {
    let x = a.clone().lu().solve(b).ok_or(Error::Singular(what))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular(what))
    }
}

/// Minimum-norm least-squares solution of `A x = b` via the pseudo-inverse.
///
/// Singular values below `rel_tol * σ_max` are treated as zero.
pub fn least_squares(a: &Matrix, b: &Vector, rel_tol: f64) -> Vector {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = (rel_tol * smax).max(f64::MIN_POSITIVE);
    svd.solve(b, eps).unwrap_or_else(|_| Vector::zeros(a.ncols()))
}

/// Numerical rank with a relative threshold.
pub fn rank(a: &Matrix, rel_tol: f64) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

pub fn sup_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
