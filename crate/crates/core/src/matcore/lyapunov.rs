//! Continuous Lyapunov equation via Kronecker vectorization.

use super::{kron, require_square, unvectorize, vectorize, DenseMatrix, MatError};
use crate::Real;
use nalgebra::DMatrix;

/// Solves `m^T X + X m = -q` for symmetric `X`.
///
/// The equation is vectorized through the Kronecker identity
/// `vec(A X B) = (B^T (x) A) vec(X)` into the linear system
/// `(I (x) m^T + m^T (x) I) vec(X) = -vec(q)` and solved densely. A singular
/// vectorized system means an eigenvalue resonance `lambda_i + lambda_j = 0`.
pub fn solve_lyapunov<T: Real>(
    m: &DenseMatrix<T>,
    q: &DenseMatrix<T>,
) -> Result<DenseMatrix<T>, MatError> {
    let n = require_square(m)?;
    let nq = require_square(q)?;
    if n != nq {
        return Err(MatError::Dimension(format!("m is {n}x{n} but q is {nq}x{nq}")));
    }
    let asym = (q - q.transpose()).amax();
    let scale = q.amax() + T::one();
    if asym > T::scalar(1e-9) * scale {
        return Err(MatError::NotSymmetric { asymmetry: asym.to_f64().unwrap_or(f64::NAN) });
    }

    let eye = DMatrix::<T>::identity(n, n);
    let mt = m.transpose();
    let system = kron(&eye, &mt) + kron(&mt, &eye);
    let rhs = -vectorize(q);

    let lu = system.clone().lu();
    let sol = lu.solve(&rhs).ok_or(MatError::LyapunovResonance)?;

    // LU may "solve" a numerically singular system; reject on residual.
    let residual = (&system * &sol - &rhs).amax();
    if residual > T::scalar(1e-6) * (rhs.amax() + T::one()) {
        return Err(MatError::LyapunovResonance);
    }

    let x = unvectorize(&sol, n, n);
    Ok((&x + x.transpose()) * T::scalar(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::matrix_from_rows;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    #[test]
    fn scalar_balance_case() {
        let m = DMatrix::from_diagonal(&dvector![-1.0, -1.0]);
        let q = DMatrix::from_diagonal(&dvector![2.0, 2.0]);
        let x = solve_lyapunov(&m, &q).unwrap();
        assert_relative_eq!(x, DMatrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn diagonal_case_matches_elementwise_oracle() {
        let m = DMatrix::from_diagonal(&dvector![-1.0, -2.0]);
        let q = DMatrix::<f64>::identity(2, 2);
        let x = solve_lyapunov(&m, &q).unwrap();
        // 2 m_ii x_ii = -q_ii
        assert_relative_eq!(x[(0, 0)], 0.5, epsilon = 1e-12);
        assert_relative_eq!(x[(1, 1)], 0.25, epsilon = 1e-12);
        assert_relative_eq!(x[(0, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn random_stable_case_satisfies_residual_bound() {
        let m = matrix_from_rows(&[
            vec![-1.2, 0.3, 0.1],
            vec![0.0, -0.7, 0.5],
            vec![0.2, -0.1, -2.0],
        ])
        .unwrap();
        let g = matrix_from_rows(&[
            vec![1.0, 0.2, 0.0],
            vec![0.3, 1.5, -0.1],
            vec![0.0, 0.4, 2.0],
        ])
        .unwrap();
        let q = &g * g.transpose() + DMatrix::identity(3, 3) * 0.1;
        let x = solve_lyapunov(&m, &q).unwrap();
        let residual = (m.transpose() * &x + &x * &m + &q).norm();
        assert!(residual <= 1e-8 * q.norm(), "residual {residual}");
        assert_relative_eq!(x.clone(), x.transpose(), epsilon = 1e-12);
    }

    #[test]
    fn resonance_is_reported() {
        // Skew-symmetric m has eigenvalues +-i, so lambda_1 + lambda_2 = 0.
        let m = matrix_from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let q = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(solve_lyapunov(&m, &q), Err(MatError::LyapunovResonance)));
    }

    #[test]
    fn asymmetric_q_is_rejected() {
        let m = DMatrix::from_diagonal(&dvector![-1.0, -1.0]);
        let q = matrix_from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(solve_lyapunov(&m, &q), Err(MatError::NotSymmetric { .. })));
    }
}
