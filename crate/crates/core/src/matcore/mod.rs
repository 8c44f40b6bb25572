//! Dense real linear-algebra kernel.
//!
//! Kronecker calculus, the matrix exponential, eigenvalue computation with
//! spectral classification, Lyapunov solving and stabilizing-gain synthesis.
//! Everything operates on [`DenseMatrix`] values; constructors reject
//! non-finite entries so downstream code can assume finite arithmetic.

mod gain;
mod lyapunov;
mod spectrum;

pub use gain::{
    controllability_matrix, detectability_gain, pbh_controllable, pbh_detectable,
    pbh_observable, pbh_stabilizable, stabilizing_gain, PbhFailure, PbhReport,
};
pub use lyapunov::solve_lyapunov;
pub use spectrum::{
    classify_spectrum, eigenvalues, symmetric_eigenvalues_sorted, Spectrum, StabilityClass,
    TimeDomain,
};

use crate::Real;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Dense real matrix in row-major construction order.
pub type DenseMatrix<T> = DMatrix<T>;

/// Default absolute tolerance for spectral boundary decisions.
pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-9;

/// Relative singular-value threshold used by rank decisions.
pub const RANK_TOL: f64 = 1e-9;

/// Condition number above which a square matrix is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

#[derive(Debug, Error)]
pub enum MatError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("non-finite entry at ({row},{col})")]
    NonFinite { row: usize, col: usize },
    #[error("row {row} has {got} entries, expected {expected}")]
    RaggedRows { row: usize, got: usize, expected: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not symmetric (max asymmetry {asymmetry})")]
    NotSymmetric { asymmetry: f64 },
    #[error("eigenvalue iteration did not converge for a {size}x{size} matrix")]
    EigenNonConvergence { size: usize },
    #[error("Lyapunov equation is singular: eigenvalue resonance lambda_i + lambda_j ~ 0")]
    LyapunovResonance,
    #[error(
        "pair is not stabilizable: PBH rank {rank} < {required} at eigenvalue {re}{im:+}i"
    )]
    NotStabilizable { re: f64, im: f64, rank: usize, required: usize },
    #[error("gain synthesis produced a non-Hurwitz closed loop (max Re = {max_re})")]
    GainSynthesisFailed { max_re: f64 },
    #[error("matrix is singular or ill-conditioned (condition {condition:.3e})")]
    IllConditioned { condition: f64 },
}

/// Checked construction from nested row data.
///
/// Rejects ragged rows and non-finite entries.
pub fn matrix_from_rows<T: Real>(rows: &[Vec<T>]) -> Result<DenseMatrix<T>, MatError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(MatError::RaggedRows { row: i, got: row.len(), expected: ncols });
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(MatError::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Checked construction from a row-major slice.
pub fn matrix_from_row_slice<T: Real>(
    nrows: usize,
    ncols: usize,
    entries: &[T],
) -> Result<DenseMatrix<T>, MatError> {
    if entries.len() != nrows * ncols {
        return Err(MatError::Dimension(format!(
            "{} entries for a {}x{} matrix",
            entries.len(),
            nrows,
            ncols
        )));
    }
    let m = DMatrix::from_row_slice(nrows, ncols, entries);
    require_finite(&m)?;
    Ok(m)
}

/// Verifies every entry is finite.
pub fn require_finite<T: Real>(m: &DenseMatrix<T>) -> Result<(), MatError> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(MatError::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

pub(crate) fn require_square<T: Real>(m: &DenseMatrix<T>) -> Result<usize, MatError> {
    if m.nrows() != m.ncols() {
        return Err(MatError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

/// Kronecker product: block `(i, j)` of the result is `a[(i, j)] * b`.
pub fn kron<T: Real>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> DenseMatrix<T> {
    a.kronecker(b)
}

/// Matrix exponential `e^{a t}`, by scaling-and-squaring with a Padé
/// approximant.
pub fn expm<T: Real>(a: &DenseMatrix<T>, t: T) -> Result<DenseMatrix<T>, MatError> {
    require_square(a)?;
    Ok((a * t).exp())
}

/// Solves `m x = rhs` by LU factorization.
pub fn lu_solve<T: Real>(
    m: &DenseMatrix<T>,
    rhs: &DMatrix<T>,
) -> Result<DMatrix<T>, MatError> {
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or(MatError::IllConditioned { condition: f64::INFINITY })
}

/// 2-norm condition number from the singular values.
pub fn condition_number<T: Real>(m: &DenseMatrix<T>) -> T {
    let sv = m.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if smin <= T::zero() {
        T::scalar(f64::INFINITY)
    } else {
        smax / smin
    }
}

/// Numerical rank via the singular-value threshold `RANK_TOL * sigma_max`.
pub fn rank<T: Real>(m: &DenseMatrix<T>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let thr = sv.max() * T::scalar(RANK_TOL);
    sv.iter().filter(|&&s| s > thr).count()
}

/// Stacks the columns of `m` into a vector (the `vec` operator).
pub fn vectorize<T: Real>(m: &DenseMatrix<T>) -> DVector<T> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vectorize`].
pub fn unvectorize<T: Real>(v: &DVector<T>, nrows: usize, ncols: usize) -> DenseMatrix<T> {
    DMatrix::from_column_slice(nrows, ncols, v.as_slice())
}
