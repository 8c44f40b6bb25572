//! Eigenvalue computation and spectral classification.
//!
//! Eigenvalues come from an orthogonal reduction to Hessenberg form followed
//! by shifted QR iteration (the real Schur decomposition); non-convergence is
//! reported, never silent.

use super::{require_square, DenseMatrix, MatError};
use crate::Real;
use nalgebra::linalg::{Schur, SymmetricEigen};
use num_complex::Complex;

/// Maximum QR sweeps before reporting non-convergence.
const MAX_QR_ITERATIONS: usize = 10_000;

/// Which stability boundary a spectrum is classified against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeDomain {
    /// Imaginary axis: Hurwitz means `Re < 0`.
    Continuous,
    /// Unit circle: Schur means `|lambda| < 1`.
    Discrete,
}

/// Spectral classification against the domain boundary with a tolerance band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityClass {
    /// All eigenvalues strictly inside the open left half-plane.
    Hurwitz,
    /// No eigenvalue to the right of the imaginary axis, at least one on it.
    MarginallyStable,
    /// All eigenvalues strictly inside the open unit disk.
    Schur,
    /// No eigenvalue outside the closed unit disk, at least one on its boundary.
    MarginallySchur,
    /// Some eigenvalue beyond the stability boundary.
    HasUnstableMode,
}

impl StabilityClass {
    /// True when no mode grows exponentially (stable or marginal).
    pub fn no_unstable_mode(self) -> bool {
        !matches!(self, StabilityClass::HasUnstableMode)
    }

    /// True when all modes decay strictly.
    pub fn strictly_stable(self) -> bool {
        matches!(self, StabilityClass::Hurwitz | StabilityClass::Schur)
    }
}

/// Eigenvalues of a square matrix together with their classification.
#[derive(Debug, Clone)]
pub struct Spectrum<T: Real> {
    pub eigenvalues: Vec<Complex<T>>,
    pub classification: StabilityClass,
    pub tolerance: T,
}

impl<T: Real> Spectrum<T> {
    /// Largest real part over the spectrum.
    pub fn max_re(&self) -> T {
        self.eigenvalues
            .iter()
            .map(|l| l.re)
            .fold(T::scalar(f64::NEG_INFINITY), |a, b| if b > a { b } else { a })
    }

    /// Largest modulus over the spectrum.
    pub fn max_modulus(&self) -> T {
        self.eigenvalues
            .iter()
            .map(|l| l.norm_sqr().sqrt())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }
}

/// All eigenvalues of `a`, with algebraic multiplicity.
pub fn eigenvalues<T: Real>(a: &DenseMatrix<T>) -> Result<Vec<Complex<T>>, MatError> {
    let n = require_square(a)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(a.clone(), T::default_epsilon(), MAX_QR_ITERATIONS)
        .ok_or(MatError::EigenNonConvergence { size: n })?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Eigenvalues of a symmetric matrix, sorted ascending.
pub fn symmetric_eigenvalues_sorted<T: Real>(
    a: &DenseMatrix<T>,
) -> Result<Vec<T>, MatError> {
    let n = require_square(a)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let sym = SymmetricEigen::try_new(a.clone(), T::default_epsilon(), MAX_QR_ITERATIONS)
        .ok_or(MatError::EigenNonConvergence { size: n })?;
    let mut ev: Vec<T> = sym.eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    Ok(ev)
}

/// Classifies the spectrum of `a` against the stability boundary of `domain`.
///
/// Continuous: Hurwitz iff all `Re < -tol`; marginally stable iff all
/// `Re <= tol` with some `Re > -tol`; otherwise an unstable mode exists.
/// Discrete is the analogue with `|lambda|` against `1 -/+ tol`.
pub fn classify_spectrum<T: Real>(
    a: &DenseMatrix<T>,
    domain: TimeDomain,
    tol: T,
) -> Result<Spectrum<T>, MatError> {
    let eigenvalues = eigenvalues(a)?;
    let classification = classify_eigenvalues(&eigenvalues, domain, tol);
    Ok(Spectrum { eigenvalues, classification, tolerance: tol })
}

/// Classification as a pure function of the eigenvalues and tolerance.
pub fn classify_eigenvalues<T: Real>(
    eigenvalues: &[Complex<T>],
    domain: TimeDomain,
    tol: T,
) -> StabilityClass {
    let margin = |l: &Complex<T>| match domain {
        TimeDomain::Continuous => l.re,
        TimeDomain::Discrete => l.norm_sqr().sqrt() - T::one(),
    };
    let all_stable = eigenvalues.iter().all(|l| margin(l) < -tol);
    if all_stable {
        return match domain {
            TimeDomain::Continuous => StabilityClass::Hurwitz,
            TimeDomain::Discrete => StabilityClass::Schur,
        };
    }
    let none_unstable = eigenvalues.iter().all(|l| margin(l) <= tol);
    if none_unstable {
        match domain {
            TimeDomain::Continuous => StabilityClass::MarginallyStable,
            TimeDomain::Discrete => StabilityClass::MarginallySchur,
        }
    } else {
        StabilityClass::HasUnstableMode
    }
}
