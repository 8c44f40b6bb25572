//! Instantaneous and uniform connectivity certification.

use super::{laplacian_of, GraphError, SwitchingGraph};
use crate::matcore::{symmetric_eigenvalues_sorted, DenseMatrix};
use crate::Real;
use nalgebra::DMatrix;

/// Connectivity and structure certificate for a switching graph.
#[derive(Debug, Clone)]
pub struct ConnectivityReport<T: Real> {
    /// Instantaneous connectivity of each schedule segment.
    pub connected_now: Vec<bool>,
    /// True when some common root witnesses connectivity of the union graph
    /// over every window of length `horizon`.
    pub uniform: bool,
    /// Window length the certificate was computed for.
    pub horizon: T,
    /// Witness root shared by all windows, when `uniform` holds.
    pub root: Option<usize>,
    /// Per-segment balance of in- and out-degrees.
    pub balanced: Vec<bool>,
    /// Per-segment adjacency symmetry.
    pub symmetric: Vec<bool>,
    /// Minimum over segments of the second-smallest eigenvalue of the
    /// symmetrized Laplacian `(L + L^T) / 2`.
    pub lambda2_min: T,
}

/// Nodes `r` that are reachable from every other node along the direction of
/// information flow (edge `j -> k` present when `a[(k, j)] >= threshold`).
///
/// Walking the rows of the adjacency from `r` traverses such paths in
/// reverse, so `r` is a root exactly when that walk covers the graph.
fn connectivity_roots<T: Real>(adjacency: &DenseMatrix<T>, threshold: T) -> Vec<usize> {
    let n = adjacency.nrows();
    let mut roots = Vec::new();
    for r in 0..n {
        let mut seen = vec![false; n];
        let mut stack = vec![r];
        seen[r] = true;
        let mut count = 1;
        while let Some(k) = stack.pop() {
            for j in 0..n {
                if !seen[j] && adjacency[(k, j)] >= threshold {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        if count == n {
            roots.push(r);
        }
    }
    roots
}

/// Whether the graph is connected at time `t`, with one witness root.
pub fn connected_at<T: Real>(
    g: &SwitchingGraph<T>,
    t: T,
) -> Result<(bool, Option<usize>), GraphError> {
    let roots = connectivity_roots(g.adjacency_at(t)?, g.eta());
    Ok((!roots.is_empty(), roots.first().copied()))
}

fn binarize<T: Real>(m: &DenseMatrix<T>) -> DenseMatrix<T> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        if m[(i, j)] > T::zero() {
            T::one()
        } else {
            T::zero()
        }
    })
}

/// Certifies uniform connectivity over windows of length `horizon`.
///
/// Windows are anchored at every segment start (one period's worth for
/// periodic schedules); each window's integrated adjacency must be connected,
/// and a single root must witness connectivity across all windows. The
/// report also carries per-segment balance, symmetry and the minimum
/// algebraic connectivity of the symmetrized Laplacians.
pub fn uniformly_connected<T: Real>(
    g: &SwitchingGraph<T>,
    horizon: T,
) -> Result<ConnectivityReport<T>, GraphError> {
    if horizon <= T::zero() {
        return Err(GraphError::NonPositiveHorizon {
            horizon: horizon.to_f64().unwrap_or(f64::NAN),
        });
    }

    let n = g.node_count();
    let struct_tol = (T::one() + g.gamma()) * T::scalar(1e-9);

    let mut connected_now = Vec::new();
    let mut balanced = Vec::new();
    let mut symmetric = Vec::new();
    let mut lambda2_min = T::scalar(f64::INFINITY);
    for seg in g.segments() {
        let a = &seg.adjacency;
        connected_now.push(!connectivity_roots(a, g.eta()).is_empty());
        let (ind, outd): (Vec<T>, Vec<T>) = (
            (0..n).map(|k| a.row(k).sum()).collect(),
            (0..n).map(|k| a.column(k).sum()).collect(),
        );
        balanced.push(ind.iter().zip(&outd).all(|(&i, &o)| (i - o).abs() <= struct_tol));
        symmetric.push((a - a.transpose()).amax() <= struct_tol);

        let l = laplacian_of(a);
        let sym = (&l + l.transpose()) * T::scalar(0.5);
        let eigs = symmetric_eigenvalues_sorted(&sym)
            .expect("symmetric eigen of a finite Laplacian");
        if n >= 2 && eigs[1] < lambda2_min {
            lambda2_min = eigs[1];
        }
    }
    if n < 2 {
        lambda2_min = T::zero();
    }

    let mut common_roots: Option<Vec<usize>> = None;
    for seg in g.segments() {
        let t = seg.start;
        let union = g.integrated_adjacency(t, t + horizon)?;
        let roots = connectivity_roots(&binarize(&union), T::scalar(0.5));
        common_roots = Some(match common_roots {
            None => roots,
            Some(prev) => prev.into_iter().filter(|r| roots.contains(r)).collect(),
        });
        if common_roots.as_ref().is_some_and(Vec::is_empty) {
            break;
        }
    }
    let roots = common_roots.unwrap_or_default();

    Ok(ConnectivityReport {
        connected_now,
        uniform: !roots.is_empty(),
        horizon,
        root: roots.first().copied(),
        balanced,
        symmetric,
        lambda2_min,
    })
}
