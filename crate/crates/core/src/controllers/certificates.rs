//! Passivity and uniform-observability certificates.

use super::ControlError;
use crate::graphnet::SwitchingGraph;
use crate::matcore::{
    expm, kron, solve_lyapunov, symmetric_eigenvalues_sorted, DenseMatrix,
};
use crate::plant::{LinearPlant, PlantKind};
use crate::Real;
use nalgebra::{DMatrix, DVector};

/// Verdict on `P A + A^T P <= 0`, `B^T P = C` for a candidate `P`.
#[derive(Debug, Clone)]
pub struct PassivityCertificate<T: Real> {
    pub p: DenseMatrix<T>,
    /// Largest eigenvalue of the symmetric matrix `P A + A^T P`.
    pub residual_lyap: T,
    /// Frobenius norm of `B^T P - C`.
    pub residual_io: T,
    /// Smallest eigenvalue of `P`.
    pub min_eig_p: T,
    pub tolerance: T,
    pub verdict: bool,
}

/// Checks the passivity conditions for the plant `(A, B, C)` with the
/// candidate storage matrix `p`.
pub fn passivity_check<T: Real>(
    plant: &LinearPlant<T>,
    p: &DenseMatrix<T>,
    tol: T,
) -> Result<PassivityCertificate<T>, ControlError> {
    let n = plant.state_dim();
    let a = plant.a().ok_or(ControlError::WrongPlantKind {
        law: "passivity-check",
        expected: "continuous",
        got: "periodic",
    })?;
    let c = plant.c().ok_or(ControlError::MissingOutput)?;
    if p.nrows() != n || p.ncols() != n {
        return Err(ControlError::BadCertificateShape { n });
    }
    let asym = (p - p.transpose()).amax();
    if asym > T::scalar(1e-9) * (p.amax() + T::one()) {
        return Err(ControlError::BadCertificateShape { n });
    }

    let lyap = p * a + a.transpose() * p;
    let lyap_sym = (&lyap + lyap.transpose()) * T::scalar(0.5);
    let lyap_eigs = symmetric_eigenvalues_sorted(&lyap_sym)?;
    let residual_lyap = *lyap_eigs.last().expect("nonempty spectrum");

    let residual_io = (plant.b().transpose() * p - c).norm();
    let p_eigs = symmetric_eigenvalues_sorted(&((p + p.transpose()) * T::scalar(0.5)))?;
    let min_eig_p = p_eigs[0];

    let verdict = residual_lyap <= tol && residual_io <= tol && min_eig_p > tol;
    Ok(PassivityCertificate {
        p: p.clone(),
        residual_lyap,
        residual_io,
        min_eig_p,
        tolerance: tol,
        verdict,
    })
}

/// Heuristic candidate storage matrices: the identity, then a solution of a
/// slightly shifted Lyapunov equation (usable when `A` sits on the stability
/// boundary). Candidates only; a user-supplied `P` is authoritative.
pub fn passivity_candidates<T: Real>(plant: &LinearPlant<T>) -> Vec<DenseMatrix<T>> {
    let n = plant.state_dim();
    let mut candidates = vec![DMatrix::<T>::identity(n, n)];
    if let Some(a) = plant.a() {
        let shift = T::scalar(1e-3) * (T::one() + a.norm());
        let shifted = a - DMatrix::<T>::identity(n, n) * shift;
        if let Ok(p) = solve_lyapunov(&shifted, &DMatrix::<T>::identity(n, n)) {
            candidates.push(p);
        }
    }
    candidates
}

/// Network Lyapunov function `V(x) = 1/2 (Pi x)^T (I_N (x) P) (Pi x)` where
/// `Pi` projects out the consensus component: with `xbar` the agent average,
/// `V = 1/2 sum_k (x_k - xbar)^T P (x_k - xbar)`.
pub fn network_lyapunov<T: Real>(p: &DenseMatrix<T>, x: &DVector<T>, n: usize) -> T {
    let agents = x.len() / n;
    let mut mean = DVector::<T>::zeros(n);
    for k in 0..agents {
        mean += x.rows(k * n, n);
    }
    mean /= T::from_usize(agents).unwrap();
    let mut v = T::zero();
    for k in 0..agents {
        let d = x.rows(k * n, n) - &mean;
        v += (d.transpose() * p * &d)[(0, 0)];
    }
    v * T::scalar(0.5)
}

/// Weighted incidence factor `D` of a symmetric adjacency: one column per
/// undirected edge with entries `+sqrt(w)` and `-sqrt(w)`, so `D D^T = L`.
pub fn incidence_factor<T: Real>(
    adjacency: &DenseMatrix<T>,
) -> Result<DenseMatrix<T>, ControlError> {
    let n = adjacency.nrows();
    let tol = T::scalar(1e-9) * (adjacency.amax() + T::one());
    if (adjacency - adjacency.transpose()).amax() > tol {
        return Err(ControlError::AsymmetricGraph);
    }
    let mut columns = Vec::new();
    for k in 0..n {
        for j in (k + 1)..n {
            let w = adjacency[(k, j)];
            if w > T::zero() {
                let mut col = DVector::<T>::zeros(n);
                col[k] = w.sqrt();
                col[j] = -w.sqrt();
                columns.push(col);
            }
        }
    }
    let e = columns.len();
    let mut d = DMatrix::<T>::zeros(n, e.max(1));
    if e == 0 {
        return Ok(DMatrix::<T>::zeros(n, 0));
    }
    for (i, col) in columns.iter().enumerate() {
        d.column_mut(i).copy_from(col);
    }
    Ok(d)
}

/// Windowed observability Gramian of the pair
/// `(I_N (x) A, D^T(t) (x) C)` over `[t0, t0 + window]`.
#[derive(Debug, Clone)]
pub struct GramianReport<T: Real> {
    pub gramian: DenseMatrix<T>,
    /// Smallest eigenvalue over the full stacked space. The consensus
    /// directions `1 (x) v` lie in the kernel of `D^T (x) C` for every
    /// graph, so this is zero up to quadrature error.
    pub min_eigenvalue: T,
    /// Smallest eigenvalue restricted to the disagreement subspace; this is
    /// the empirical uniform-observability level.
    pub min_eigenvalue_disagreement: T,
    pub window: (T, T),
}

/// Orthonormal basis of the hyperplane orthogonal to the all-ones vector.
fn ones_complement_basis<T: Real>(n: usize) -> DMatrix<T> {
    let mut basis = DMatrix::<T>::zeros(n, n - 1);
    for j in 1..n {
        let scale = T::one() / (T::from_usize(j * (j + 1)).unwrap()).sqrt();
        for i in 0..j {
            basis[(i, j - 1)] = scale;
        }
        basis[(j, j - 1)] = -T::from_usize(j).unwrap() * scale;
    }
    basis
}

/// Integrates the observability Gramian of the symmetric-graph output pair
/// over a window, using composite Simpson quadrature with substeps of at
/// most `step` on every constant-adjacency span.
///
/// Fails on segments whose adjacency is not symmetric, where the
/// factorization `L = D D^T` does not apply.
pub fn observability_gramian<T: Real>(
    plant: &LinearPlant<T>,
    graph: &SwitchingGraph<T>,
    t0: T,
    window: T,
    step: T,
) -> Result<GramianReport<T>, ControlError> {
    if plant.kind() != PlantKind::Continuous {
        return Err(ControlError::WrongPlantKind {
            law: "observability-gramian",
            expected: "continuous",
            got: "periodic or discrete",
        });
    }
    let a = plant.a().expect("continuous plant");
    let c = plant.c().ok_or(ControlError::MissingOutput)?;
    let agents = graph.node_count();
    let n = plant.state_dim();
    let dim = agents * n;

    let mut gramian = DMatrix::<T>::zeros(dim, dim);
    if window > T::zero() {
        for (span_start, span_end, seg_idx) in graph.piecewise_spans(t0, t0 + window)? {
            let adjacency = &graph.segments()[seg_idx].adjacency;
            let d = incidence_factor(adjacency)?;
            if d.ncols() == 0 {
                continue;
            }
            // (D^T (x) I_p)(I_N (x) C) = D^T (x) C
            let output = kron(&d.transpose(), c);
            let weight = output.transpose() * &output;

            let span = span_end - span_start;
            let substeps = {
                let raw = (span / step).ceil().to_usize().unwrap_or(1).max(1);
                raw + raw % 2 // Simpson needs an even count
            };
            let h = span / T::from_usize(substeps).unwrap();
            let eye_agents = DMatrix::<T>::identity(agents, agents);
            for i in 0..=substeps {
                let t = span_start + h * T::from_usize(i).unwrap();
                let phi = kron(&eye_agents, &expm(a, t - t0)?);
                let integrand = phi.transpose() * &weight * &phi;
                let coeff = if i == 0 || i == substeps {
                    T::one()
                } else if i % 2 == 1 {
                    T::scalar(4.0)
                } else {
                    T::scalar(2.0)
                };
                gramian += integrand * (coeff * h / T::scalar(3.0));
            }
        }
    }
    gramian = (&gramian + gramian.transpose()) * T::scalar(0.5);

    let eigs = symmetric_eigenvalues_sorted(&gramian)?;
    let min_eigenvalue = eigs[0];

    let min_eigenvalue_disagreement = if agents >= 2 {
        let u = kron(&ones_complement_basis::<T>(agents), &DMatrix::<T>::identity(n, n));
        let restricted = u.transpose() * &gramian * &u;
        let restricted = (&restricted + restricted.transpose()) * T::scalar(0.5);
        symmetric_eigenvalues_sorted(&restricted)?[0]
    } else {
        T::zero()
    };

    Ok(GramianReport {
        gramian,
        min_eigenvalue,
        min_eigenvalue_disagreement,
        window: (t0, t0 + window),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::matrix_from_rows;
    use approx::assert_relative_eq;

    fn harmonic_with_velocity_output() -> LinearPlant<f64> {
        LinearPlant::continuous(
            matrix_from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap(),
            matrix_from_rows(&[vec![0.0], vec![1.0]]).unwrap(),
            Some(matrix_from_rows(&[vec![0.0, 1.0]]).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn skew_plant_with_identity_storage_is_passive() {
        let plant = harmonic_with_velocity_output();
        let cert = passivity_check(&plant, &DMatrix::identity(2, 2), 1e-12).unwrap();
        assert!(cert.verdict);
        assert!(cert.residual_lyap.abs() <= 1e-12);
        assert!(cert.residual_io <= 1e-12);
        assert!(cert.min_eig_p > 0.0);
    }

    #[test]
    fn mismatched_output_map_fails_the_io_condition() {
        let plant = LinearPlant::continuous(
            matrix_from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap(),
            matrix_from_rows(&[vec![0.0], vec![1.0]]).unwrap(),
            Some(matrix_from_rows(&[vec![1.0, 0.0]]).unwrap()),
        )
        .unwrap();
        let cert = passivity_check(&plant, &DMatrix::identity(2, 2), 1e-12).unwrap();
        assert!(!cert.verdict);
        assert!(cert.residual_io > 1.0);
    }

    #[test]
    fn strictly_stable_identity_plant_is_passive() {
        let plant = LinearPlant::continuous(
            DMatrix::<f64>::identity(2, 2) * -1.0,
            DMatrix::identity(2, 2),
            Some(DMatrix::identity(2, 2)),
        )
        .unwrap();
        let cert = passivity_check(&plant, &DMatrix::identity(2, 2), 1e-12).unwrap();
        assert!(cert.verdict);
        assert!(cert.residual_lyap < 0.0);
    }

    #[test]
    fn candidates_start_with_the_identity() {
        let plant = harmonic_with_velocity_output();
        let candidates = passivity_candidates(&plant);
        assert!(!candidates.is_empty());
        assert_eq!(candidates[0], DMatrix::identity(2, 2));
        // The identity candidate certifies this plant.
        assert!(passivity_check(&plant, &candidates[0], 1e-12).unwrap().verdict);
    }

    #[test]
    fn incidence_factor_reproduces_the_laplacian() {
        let adj = matrix_from_rows(&[
            vec![0.0, 2.0, 0.0],
            vec![2.0, 0.0, 0.5],
            vec![0.0, 0.5, 0.0],
        ])
        .unwrap();
        let d = incidence_factor(&adj).unwrap();
        let l = crate::graphnet::laplacian_of(&adj);
        assert_relative_eq!(&d * d.transpose(), l, epsilon = 1e-12);
    }

    #[test]
    fn incidence_factor_rejects_directed_graphs() {
        let adj = matrix_from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            incidence_factor(&adj),
            Err(ControlError::AsymmetricGraph)
        ));
    }

    #[test]
    fn network_lyapunov_vanishes_only_on_consensus() {
        let p = DMatrix::<f64>::identity(2, 2);
        let sync = DVector::from_vec(vec![0.3, -0.1, 0.3, -0.1]);
        assert!(network_lyapunov(&p, &sync, 2).abs() < 1e-15);
        let spread = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        assert!(network_lyapunov(&p, &spread, 2) > 0.0);
    }

    fn symmetric_pair_graph() -> SwitchingGraph<f64> {
        let adj = matrix_from_rows(&[
            vec![0.0, 1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        SwitchingGraph::time_invariant(adj, 1.0, 1.0).unwrap()
    }

    fn symmetric_ring_graph() -> SwitchingGraph<f64> {
        let adj = matrix_from_rows(&[
            vec![0.0, 1.0, 0.0, 1.0],
            vec![1.0, 0.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0, 1.0],
            vec![1.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        SwitchingGraph::time_invariant(adj, 1.0, 1.0).unwrap()
    }

    #[test]
    fn disconnected_graph_has_zero_disagreement_observability() {
        let plant = harmonic_with_velocity_output();
        let report =
            observability_gramian(&plant, &symmetric_pair_graph(), 0.0, 4.0, 0.02).unwrap();
        // Consensus directions are unobservable for every graph.
        assert!(report.min_eigenvalue.abs() < 1e-8);
        // Cross-component disagreement is unobservable in a split graph.
        assert!(report.min_eigenvalue_disagreement.abs() < 1e-8);
    }

    #[test]
    fn connected_graph_is_uniformly_observable_on_disagreement() {
        let plant = harmonic_with_velocity_output();
        let report =
            observability_gramian(&plant, &symmetric_ring_graph(), 0.0, 8.0, 0.02).unwrap();
        assert!(report.min_eigenvalue.abs() < 1e-8);
        assert!(report.min_eigenvalue_disagreement > 1e-3);

        // Quadrature sanity: halving the step barely moves the answer.
        let finer =
            observability_gramian(&plant, &symmetric_ring_graph(), 0.0, 8.0, 0.01).unwrap();
        assert_relative_eq!(
            report.min_eigenvalue_disagreement,
            finer.min_eigenvalue_disagreement,
            max_relative = 1e-6
        );
    }

    #[test]
    fn zero_window_yields_the_zero_gramian() {
        let plant = harmonic_with_velocity_output();
        let report =
            observability_gramian(&plant, &symmetric_ring_graph(), 0.0, 0.0, 0.05).unwrap();
        assert!(report.gramian.amax() < 1e-15);
        assert!(report.min_eigenvalue.abs() < 1e-15);
    }

    #[test]
    fn directed_segments_make_the_certificate_inapplicable() {
        let plant = harmonic_with_velocity_output();
        let adj = matrix_from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let g = SwitchingGraph::time_invariant(adj, 1.0, 1.0).unwrap();
        assert!(matches!(
            observability_gramian(&plant, &g, 0.0, 1.0, 0.05),
            Err(ControlError::AsymmetricGraph)
        ));
    }
}
