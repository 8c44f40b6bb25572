//! Floquet analysis of periodic plants.
//!
//! The state-transition matrix of a periodic system factors as
//! `Phi(t, 0) = Q(t) e^{Omega t}` with `Q` periodic; the eigenvalues of the
//! monodromy matrix `Phi(T, 0)` are the Floquet multipliers and their scaled
//! principal logarithms the characteristic exponents.

use super::{LinearPlant, PeriodicCoefficients, PlantError};
use crate::matcore::{eigenvalues, expm, DenseMatrix};
use crate::Real;
use nalgebra::{DMatrix, SVD};
use num_complex::Complex;

/// Monodromy matrix, multipliers, exponents and sampled periodic factor.
#[derive(Debug, Clone)]
pub struct FloquetData<T: Real> {
    /// State-transition matrix over one period.
    pub monodromy: DenseMatrix<T>,
    /// Eigenvalues of the monodromy matrix.
    pub multipliers: Vec<Complex<T>>,
    /// Principal-branch logarithms of the multipliers divided by the period.
    pub exponents: Vec<Complex<T>>,
    /// Samples `(t, Q(t))` of the periodic transformation, when the matrix
    /// logarithm of the monodromy could be reconstructed.
    pub q_samples: Option<Vec<(T, DenseMatrix<T>)>>,
}

impl<T: Real> FloquetData<T> {
    /// Largest real part over the characteristic exponents.
    pub fn max_exponent_re(&self) -> T {
        self.exponents
            .iter()
            .map(|e| e.re)
            .fold(T::scalar(f64::NEG_INFINITY), T::max)
    }

    /// The periodic analogue of the no-unstable-mode hypothesis: all
    /// characteristic exponents in the closed left half-plane.
    pub fn no_unstable_mode(&self, tol: T) -> bool {
        self.max_exponent_re() <= tol
    }
}

/// Integrates `Phi' = A(t) Phi`, `Phi(0) = I`, over one period with the
/// classical fixed-step fourth-order scheme.
///
/// `step` must divide the period and resolve the coefficient sample grid.
pub fn monodromy<T: Real>(
    plant: &LinearPlant<T>,
    step: T,
) -> Result<FloquetData<T>, PlantError> {
    let coeffs = plant.periodic_coefficients().ok_or(PlantError::NotPeriodic)?;
    let period = coeffs.period();
    let ratio = period / step;
    let n_steps = ratio.round().to_usize().unwrap_or(0);
    if n_steps == 0 || (ratio - T::from_usize(n_steps).unwrap()).abs() > T::scalar(1e-9) * ratio {
        return Err(PlantError::StepDoesNotDividePeriod {
            step: step.to_f64().unwrap_or(f64::NAN),
            period: period.to_f64().unwrap_or(f64::NAN),
        });
    }
    let spacing = coeffs.spacing();
    if step > spacing * (T::one() + T::scalar(1e-9)) {
        return Err(PlantError::StepTooCoarse {
            step: step.to_f64().unwrap_or(f64::NAN),
            spacing: spacing.to_f64().unwrap_or(f64::NAN),
        });
    }

    let n = coeffs.dim();
    let h = period / T::from_usize(n_steps).unwrap();
    let half = h * T::scalar(0.5);
    let sixth = h / T::scalar(6.0);
    let two = T::scalar(2.0);

    let mut phi = DMatrix::<T>::identity(n, n);
    let sample_stride = (n_steps / 64).max(1);
    let mut phi_samples: Vec<(T, DenseMatrix<T>)> = vec![(T::zero(), phi.clone())];
    for k in 0..n_steps {
        let t = h * T::from_usize(k).unwrap();
        let a1 = coeffs.at(t);
        let a2 = coeffs.at(t + half);
        let a4 = coeffs.at(t + h);
        let k1 = &a1 * &phi;
        let k2 = &a2 * (&phi + &k1 * half);
        let k3 = &a2 * (&phi + &k2 * half);
        let k4 = &a4 * (&phi + &k3 * h);
        phi += (k1 + k2 * two + k3 * two + k4) * sixth;
        if (k + 1) % sample_stride == 0 && k + 1 < n_steps {
            phi_samples.push((t + h, phi.clone()));
        }
    }

    let multipliers = eigenvalues(&phi)?;
    let exponents = multipliers
        .iter()
        .map(|mu| {
            let modulus = mu.norm_sqr().sqrt();
            Complex::new(modulus.ln() / period, mu.im.atan2(mu.re) / period)
        })
        .collect();

    let q_samples = real_matrix_log(&phi, period).map(|omega| {
        phi_samples
            .iter()
            .map(|(t, p)| {
                let decay = expm(&omega, -*t).expect("square by construction");
                (*t, p * decay)
            })
            .collect()
    });

    Ok(FloquetData { monodromy: phi, multipliers, exponents, q_samples })
}

/// Real matrix `Omega` with `e^{Omega T} = m`, via a complex eigenvalue
/// decomposition. `None` when the multipliers are not simple, when a real
/// logarithm does not exist, or when the reconstruction residual is poor.
fn real_matrix_log<T: Real>(m: &DenseMatrix<T>, period: T) -> Option<DenseMatrix<T>> {
    let n = m.nrows();
    let lambdas = eigenvalues(m).ok()?;
    let scale = lambdas.iter().map(|l| l.norm_sqr().sqrt()).fold(T::zero(), T::max);
    for i in 0..n {
        for j in 0..i {
            if (lambdas[i] - lambdas[j]).norm_sqr().sqrt() <= T::scalar(1e-6) * scale {
                return None;
            }
        }
    }

    let mc = DMatrix::<Complex<T>>::from_fn(n, n, |i, j| Complex::new(m[(i, j)], T::zero()));
    let mut v = DMatrix::<Complex<T>>::zeros(n, n);
    for (idx, lambda) in lambdas.iter().enumerate() {
        let mut shifted = mc.clone();
        for d in 0..n {
            shifted[(d, d)] -= lambda;
        }
        let svd = SVD::new(shifted, false, true);
        let v_t = svd.v_t?;
        let mut min_idx = 0;
        for (i, s) in svd.singular_values.iter().enumerate() {
            if *s < svd.singular_values[min_idx] {
                min_idx = i;
            }
        }
        let eigenvector = v_t.row(min_idx).adjoint();
        v.column_mut(idx).copy_from(&eigenvector);
    }

    let v_inv = v.clone().lu().try_inverse()?;
    let log_diag = DMatrix::<Complex<T>>::from_fn(n, n, |i, j| {
        if i == j {
            let l = lambdas[i];
            let modulus = l.norm_sqr().sqrt();
            if modulus <= T::zero() {
                Complex::new(T::scalar(f64::NEG_INFINITY), T::zero())
            } else {
                Complex::new(modulus.ln() / period, l.im.atan2(l.re) / period)
            }
        } else {
            Complex::new(T::zero(), T::zero())
        }
    });
    let omega_c = &v * log_diag * v_inv;

    let mut omega = DMatrix::<T>::zeros(n, n);
    let mut max_im = T::zero();
    for i in 0..n {
        for j in 0..n {
            omega[(i, j)] = omega_c[(i, j)].re;
            max_im = T::max(max_im, omega_c[(i, j)].im.abs());
        }
    }
    let omega_scale = omega.amax() + T::one();
    if max_im > T::scalar(1e-6) * omega_scale {
        return None;
    }
    let reconstructed = expm(&omega, period).ok()?;
    let residual = (&reconstructed - m).amax();
    if residual > T::scalar(1e-6) * (m.amax() + T::one()) {
        return None;
    }
    Some(omega)
}

/// Periodic coefficients `A(t) = w J + R(w t) Omega R(w t)^T` built from a
/// constant `Omega` seen in a frame spinning at rate `w` (planar rotation
/// `R`, generator `J`). The characteristic exponents of the resulting system
/// are the eigenvalues of `Omega`, which makes this family a convenient
/// ground-truth fixture and demo plant.
pub fn rotating_frame_coefficients<T: Real>(
    omega: &DenseMatrix<T>,
    spin_rate: T,
    sample_count: usize,
) -> Result<PeriodicCoefficients<T>, PlantError> {
    if omega.nrows() != 2 || omega.ncols() != 2 {
        return Err(PlantError::Dimension(format!(
            "rotating-frame construction is planar, Omega is {}x{}",
            omega.nrows(),
            omega.ncols()
        )));
    }
    if spin_rate <= T::zero() {
        return Err(PlantError::BadPeriod { period: f64::NAN });
    }
    let period = T::two_pi() / spin_rate;
    let spacing = period / T::from_usize(sample_count).unwrap();
    let j = DMatrix::<T>::from_row_slice(2, 2, &[T::zero(), T::one(), -T::one(), T::zero()]);
    let samples = (0..sample_count)
        .map(|k| {
            let theta = spin_rate * spacing * T::from_usize(k).unwrap();
            let (s, c) = (theta.sin(), theta.cos());
            let r = DMatrix::<T>::from_row_slice(2, 2, &[c, s, -s, c]);
            &j * spin_rate + &r * omega * r.transpose()
        })
        .collect();
    PeriodicCoefficients::new(period, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::matrix_from_rows;
    use approx::assert_relative_eq;

    fn constant_periodic(a: DMatrix<f64>, period: f64) -> LinearPlant<f64> {
        let samples = vec![a.clone(); 8];
        let coeffs = PeriodicCoefficients::new(period, samples).unwrap();
        LinearPlant::periodic(coeffs, DMatrix::identity(a.nrows(), a.nrows()), None).unwrap()
    }

    fn cexp(z: Complex<f64>) -> Complex<f64> {
        Complex::new(z.re.exp() * z.im.cos(), z.re.exp() * z.im.sin())
    }

    /// Greedy closest-pair matching of two small complex multisets.
    fn max_spectral_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
        let mut remaining: Vec<Complex<f64>> = b.to_vec();
        let mut worst: f64 = 0.0;
        for x in a {
            let (idx, d) = remaining
                .iter()
                .enumerate()
                .map(|(i, y)| (i, (x - y).norm()))
                .min_by(|p, q| p.1.partial_cmp(&q.1).unwrap())
                .expect("same cardinality");
            worst = worst.max(d);
            remaining.swap_remove(idx);
        }
        worst
    }

    #[test]
    fn constant_coefficients_reduce_to_the_matrix_exponential() {
        let a = matrix_from_rows(&[vec![0.0, 1.0], vec![-1.0, -0.5]]).unwrap();
        let plant = constant_periodic(a.clone(), 0.8);
        let data = monodromy(&plant, 0.8 / 1024.0).unwrap();
        let direct = expm(&a, 0.8).unwrap();
        assert_relative_eq!(data.monodromy, direct, epsilon = 1e-8);
    }

    #[test]
    fn rotating_frame_exponents_match_the_chosen_generator() {
        let omega = matrix_from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let coeffs = rotating_frame_coefficients(&omega, 2.0 * std::f64::consts::PI, 8192).unwrap();
        let period = coeffs.period();
        let plant =
            LinearPlant::periodic(coeffs, DMatrix::identity(2, 2), None).unwrap();
        let data = monodromy(&plant, period / 8192.0).unwrap();

        let expected = eigenvalues(&omega).unwrap();
        assert!(max_spectral_distance(&data.exponents, &expected) <= 1e-6);
        assert!(data.no_unstable_mode(1e-6));

        // exp(period * exponent) recovers each multiplier.
        for (e, m) in data.exponents.iter().zip(&data.multipliers) {
            let back = cexp(Complex::new(e.re * period, e.im * period));
            assert!((back - m).norm() <= 1e-8);
        }

        // Q(t) from the reconstructed logarithm stays near-orthonormal here.
        let q = data.q_samples.expect("simple multipliers admit a real log");
        for (_, qt) in &q {
            assert_relative_eq!(qt.determinant().abs(), 1.0, epsilon = 1e-4);
        }
    }

    #[test]
    fn unstable_generator_is_detected() {
        let omega = matrix_from_rows(&[vec![0.3, 1.0], vec![-1.0, 0.3]]).unwrap();
        let coeffs = rotating_frame_coefficients(&omega, 2.0 * std::f64::consts::PI, 2048).unwrap();
        let period = coeffs.period();
        let plant = LinearPlant::periodic(coeffs, DMatrix::identity(2, 2), None).unwrap();
        let data = monodromy(&plant, period / 2048.0).unwrap();
        assert!(data.multipliers.iter().any(|m| m.norm() > 1.0 + 1e-6));
        assert!(!data.no_unstable_mode(1e-6));
    }

    #[test]
    fn exponents_are_stable_under_step_halving() {
        let omega = matrix_from_rows(&[vec![0.0, 0.7], vec![-0.7, -0.2]]).unwrap();
        let coeffs = rotating_frame_coefficients(&omega, 2.0 * std::f64::consts::PI, 4096).unwrap();
        let period = coeffs.period();
        let plant = LinearPlant::periodic(coeffs, DMatrix::identity(2, 2), None).unwrap();

        let coarse = monodromy(&plant, period / 4096.0).unwrap();
        let fine = monodromy(&plant, period / 8192.0).unwrap();
        assert!(max_spectral_distance(&coarse.exponents, &fine.exponents) <= 1e-6);
    }

    #[test]
    fn step_constraints_are_enforced() {
        let a = matrix_from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let plant = constant_periodic(a, 1.0);
        assert!(matches!(
            monodromy(&plant, 0.3),
            Err(PlantError::StepDoesNotDividePeriod { .. })
        ));
        assert!(matches!(
            monodromy(&plant, 0.25),
            Err(PlantError::StepTooCoarse { .. })
        ));
        // Spacing is 1/8; step 1/8 divides the period and resolves the grid.
        assert!(monodromy(&plant, 0.125).is_ok());
    }

    #[test]
    fn non_periodic_plant_is_rejected() {
        let plant = LinearPlant::continuous(
            DMatrix::<f64>::zeros(2, 2),
            DMatrix::identity(2, 2),
            None,
        )
        .unwrap();
        assert!(matches!(monodromy(&plant, 0.1), Err(PlantError::NotPeriodic)));
    }
}
