//! PBH rank tests and stabilizing-gain synthesis.
//!
//! Gains come from Bass's shifted-Lyapunov construction: shift `A` by a
//! scalar beyond its spectral bound, solve one Lyapunov equation for `P > 0`
//! and take `K = -B^T P^{-1}`. Pairs that are stabilizable but not
//! controllable are first reduced to their controllable subspace.

use super::spectrum::{eigenvalues, TimeDomain};
use super::{
    lu_solve, rank, require_square, solve_lyapunov, DenseMatrix, MatError,
    DEFAULT_SPECTRAL_TOL, RANK_TOL,
};
use crate::Real;
use nalgebra::{DMatrix, SVD};
use num_complex::Complex;

/// One eigenvalue at which the PBH rank test fails.
#[derive(Debug, Clone)]
pub struct PbhFailure<T: Real> {
    pub eigenvalue: Complex<T>,
    pub rank: usize,
    pub required: usize,
}

/// Outcome of a PBH test over a set of eigenvalues.
#[derive(Debug, Clone)]
pub struct PbhReport<T: Real> {
    pub ok: bool,
    /// Eigenvalues whose mode fails the rank test.
    pub failures: Vec<PbhFailure<T>>,
    /// Number of eigenvalues the test examined.
    pub checked: usize,
}

fn pbh_rank_at<T: Real>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    lambda: Complex<T>,
) -> usize {
    let n = a.nrows();
    let m = b.ncols();
    let mut pencil = DMatrix::<Complex<T>>::zeros(n, n + m);
    for j in 0..n {
        for i in 0..n {
            pencil[(i, j)] = Complex::new(a[(i, j)], T::zero());
        }
        pencil[(j, j)] -= lambda;
    }
    for j in 0..m {
        for i in 0..n {
            pencil[(i, n + j)] = Complex::new(b[(i, j)], T::zero());
        }
    }
    let sv = SVD::new(pencil, false, false).singular_values;
    let thr = sv.max() * T::scalar(RANK_TOL);
    sv.iter().filter(|&&s| s > thr).count()
}

fn pbh_over<T: Real>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    select: impl Fn(&Complex<T>) -> bool,
) -> Result<PbhReport<T>, MatError> {
    let n = require_square(a)?;
    if b.nrows() != n {
        return Err(MatError::Dimension(format!(
            "input matrix has {} rows, state dimension is {n}",
            b.nrows()
        )));
    }
    let mut failures = Vec::new();
    let mut checked = 0;
    for lambda in eigenvalues(a)? {
        if !select(&lambda) {
            continue;
        }
        checked += 1;
        let r = pbh_rank_at(a, b, lambda);
        if r < n {
            failures.push(PbhFailure { eigenvalue: lambda, rank: r, required: n });
        }
    }
    Ok(PbhReport { ok: failures.is_empty(), failures, checked })
}

/// PBH stabilizability: every eigenvalue at or beyond the stability boundary
/// (within `tol`) must pass the rank test `rank [A - lambda I, B] = n`.
pub fn pbh_stabilizable<T: Real>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    domain: TimeDomain,
    tol: T,
) -> Result<PbhReport<T>, MatError> {
    pbh_over(a, b, |l| match domain {
        TimeDomain::Continuous => l.re >= -tol,
        TimeDomain::Discrete => l.norm_sqr().sqrt() >= T::one() - tol,
    })
}

/// PBH detectability of `(A, C)`: the dual test on `(A^T, C^T)`.
pub fn pbh_detectable<T: Real>(
    a: &DenseMatrix<T>,
    c: &DenseMatrix<T>,
    domain: TimeDomain,
    tol: T,
) -> Result<PbhReport<T>, MatError> {
    pbh_stabilizable(&a.transpose(), &c.transpose(), domain, tol)
}

/// PBH controllability: the rank test at every eigenvalue.
pub fn pbh_controllable<T: Real>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
) -> Result<PbhReport<T>, MatError> {
    pbh_over(a, b, |_| true)
}

/// PBH observability of `(A, C)`.
pub fn pbh_observable<T: Real>(
    a: &DenseMatrix<T>,
    c: &DenseMatrix<T>,
) -> Result<PbhReport<T>, MatError> {
    pbh_controllable(&a.transpose(), &c.transpose())
}

/// Controllability matrix `[B, AB, ..., A^{n-1}B]`.
pub fn controllability_matrix<T: Real>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
) -> DenseMatrix<T> {
    let n = a.nrows();
    let m = b.ncols();
    let mut ctrb = DMatrix::<T>::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        ctrb.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * &block;
    }
    ctrb
}

/// Bass gain for a controllable pair: `K = -B^T P^{-1}` with
/// `(A + beta I) P + P (A + beta I)^T = 2 B B^T` and `beta` beyond the
/// spectral bound of `A`.
fn bass_gain<T: Real>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
) -> Result<DenseMatrix<T>, MatError> {
    let n = a.nrows();
    let beta = T::one() + a.norm();
    let shifted = a + DMatrix::<T>::identity(n, n) * beta;
    let q = (b * b.transpose()) * T::scalar(-2.0);
    let p = solve_lyapunov(&shifted.transpose(), &q)?;
    let y = lu_solve(&p, b)?;
    Ok(-y.transpose())
}

/// Synthesizes `K` with `A + B K` Hurwitz.
///
/// Returns `K = 0` when `A` is already Hurwitz. Fails with an explicit PBH
/// certificate (offending eigenvalue and rank defect) on unstabilizable
/// pairs. The closed-loop spectrum is re-checked before returning.
pub fn stabilizing_gain<T: Real>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
) -> Result<DenseMatrix<T>, MatError> {
    let n = require_square(a)?;
    if b.nrows() != n {
        return Err(MatError::Dimension(format!(
            "B has {} rows, state dimension is {n}",
            b.nrows()
        )));
    }
    let m = b.ncols();
    let tol = T::scalar(DEFAULT_SPECTRAL_TOL);

    let open_loop = eigenvalues(a)?;
    let max_re = open_loop.iter().map(|l| l.re).fold(T::scalar(f64::NEG_INFINITY), T::max);
    if max_re < -tol {
        return Ok(DMatrix::zeros(m, n));
    }

    let report = pbh_stabilizable(a, b, TimeDomain::Continuous, tol)?;
    if let Some(f) = report.failures.first() {
        return Err(MatError::NotStabilizable {
            re: f.eigenvalue.re.to_f64().unwrap_or(f64::NAN),
            im: f.eigenvalue.im.to_f64().unwrap_or(f64::NAN),
            rank: f.rank,
            required: f.required,
        });
    }

    let ctrb = controllability_matrix(a, b);
    let r = rank(&ctrb);
    let k = if r == n {
        bass_gain(a, b)?
    } else {
        // Restrict to the controllable subspace, synthesize there, lift back.
        let svd = SVD::new(ctrb, true, false);
        let u = svd.u.expect("left singular vectors requested");
        let a_bar = u.transpose() * a * &u;
        let b_bar = u.transpose() * b;
        let a11 = a_bar.view((0, 0), (r, r)).into_owned();
        let b1 = b_bar.view((0, 0), (r, m)).into_owned();
        let k1 = bass_gain(&a11, &b1)?;
        let mut k_bar = DMatrix::<T>::zeros(m, n);
        k_bar.view_mut((0, 0), (m, r)).copy_from(&k1);
        k_bar * u.transpose()
    };

    let closed = eigenvalues(&(a + b * &k))?;
    let max_re = closed.iter().map(|l| l.re).fold(T::scalar(f64::NEG_INFINITY), T::max);
    if max_re >= T::zero() {
        return Err(MatError::GainSynthesisFailed { max_re: max_re.to_f64().unwrap_or(f64::NAN) });
    }
    Ok(k)
}

/// Synthesizes `H` with `A + H C` Hurwitz, by duality on the transposed pair.
pub fn detectability_gain<T: Real>(
    a: &DenseMatrix<T>,
    c: &DenseMatrix<T>,
) -> Result<DenseMatrix<T>, MatError> {
    let k = stabilizing_gain(&a.transpose(), &c.transpose())?;
    Ok(k.transpose())
}
