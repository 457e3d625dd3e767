//! Stationary posterior covariance of a linear DCEVAE, its numerical
//! oracle, and latent covariance reports for trained models.
//!
//! Latents are ordered `u = [u_r, u_d]` with `n = |u_r|`, `m = |u_d|`
//! throughout this module.

mod empirical;
mod linear;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub use empirical::{empirical_covariance, CovarianceReport, EmpiricalCovariance};
pub use linear::{sigma_numeric, sigma_star, LinearModelSpec, OutcomeTerm, NUMERIC_TOLERANCE};

/// Off-block share of the squared Frobenius mass for the `[u_r, u_d]`
/// partition with `|u_r| = n`. Zero for an all-zero matrix.
pub fn block_score(sigma: &Matrix, n: usize) -> Result<f64> {
    let (rows, cols) = sigma.shape();
    if rows != cols || n > rows {
        return Err(Error::shape(
            "block_score",
            format!("square with side >= {n}"),
            format!("{rows}x{cols}"),
        ));
    }
    let (mut off, mut total) = (0.0, 0.0);
    for i in 0..rows {
        for j in 0..cols {
            let v = sigma[(i, j)] * sigma[(i, j)];
            total += v;
            if (i < n) != (j < n) {
                off += v;
            }
        }
    }
    Ok(if total == 0.0 { 0.0 } else { off / total })
}

/// Frobenius distance between two equally shaped matrices.
pub fn frobenius_distance(a: &Matrix, b: &Matrix) -> Result<f64> {
    Ok(a.sub(b)?.frobenius())
}

pub(crate) fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub(crate) fn from_na(m: &DMatrix<f64>) -> Matrix {
    let (r, c) = m.shape();
    Matrix::from_vec(r, c, m.transpose().as_slice().to_vec()).expect("shape from nalgebra")
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(sigma: &Matrix) -> Result<f64> {
    if sigma.rows() != sigma.cols() || sigma.rows() == 0 {
        return Err(Error::shape(
            "min_eigenvalue",
            "non-empty square",
            format!("{:?}", sigma.shape()),
        ));
    }
    let e = to_na(sigma).symmetric_eigen();
    Ok(e.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}
