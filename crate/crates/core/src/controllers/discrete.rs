//! Discrete-time coupling laws.

use super::ControlError;
use crate::Real;
use nalgebra::{DMatrix, DVector};

/// Per-agent update `x_k + eps_k * sum_j a_kj (x_j - x_k)`, which equals
/// `x_k - eps_k * sum_j l_kj x_j`.
fn relaxation_update<T: Real>(
    adjacency: &DMatrix<T>,
    epsilons: &[T],
    v: &DVector<T>,
    n: usize,
) -> DVector<T> {
    let agents = adjacency.nrows();
    let mut out = v.clone();
    for k in 0..agents {
        let vk = v.rows(k * n, n).into_owned();
        let mut acc = DVector::<T>::zeros(n);
        for j in 0..agents {
            let w = adjacency[(k, j)];
            if w != T::zero() {
                acc += (v.rows(j * n, n) - &vk) * w;
            }
        }
        let mut block = out.rows_mut(k * n, n);
        block += acc * epsilons[k];
    }
    out
}

fn check_epsilons<T: Real>(
    adjacency: &DMatrix<T>,
    epsilons: &[T],
) -> Result<(), ControlError> {
    let agents = adjacency.nrows();
    if epsilons.len() != agents {
        return Err(ControlError::EpsilonCount { expected: agents, got: epsilons.len() });
    }
    for (k, &eps) in epsilons.iter().enumerate() {
        let degree: T = adjacency.row(k).sum();
        let in_bound = if degree > T::zero() { eps < T::one() / degree } else { true };
        if !(eps > T::zero() && in_bound) {
            return Err(ControlError::EpsilonOutOfRange {
                agent: k,
                value: eps.to_f64().unwrap_or(f64::NAN),
                bound: if degree > T::zero() {
                    (T::one() / degree).to_f64().unwrap_or(f64::NAN)
                } else {
                    f64::INFINITY
                },
                degree: degree.to_f64().unwrap_or(f64::NAN),
                segment: 0,
            });
        }
    }
    Ok(())
}

/// Discrete consensus step `x_k(t+1) = x_k(t) - eps_k sum_j l_kj x_j(t)`
/// with `eps_k` in the open interval `(0, 1/d_k^in)`.
///
/// The induced update matrix `I - eps L (x) I_n` is row-stochastic with a
/// positive diagonal for admissible step weights.
pub fn consensus_step_discrete<T: Real>(
    adjacency: &DMatrix<T>,
    epsilons: &[T],
    x: &DVector<T>,
    n: usize,
) -> Result<DVector<T>, ControlError> {
    check_epsilons(adjacency, epsilons)?;
    Ok(relaxation_update(adjacency, epsilons, x, n))
}

/// Invertible-`B` discrete state coupling: the consensus relaxation applied
/// first, then propagated through `A`, so the closed loop conjugates to the
/// consensus recursion under `z_k = A^{-t} x_k`.
///
/// The implied control is `u_k = -eps_k B^{-1} A sum_j l_kj x_j`; the `B`
/// cancellation is built in.
pub fn discrete_static_inverse_b_step<T: Real>(
    a: &DMatrix<T>,
    adjacency: &DMatrix<T>,
    epsilons: &[T],
    x: &DVector<T>,
    n: usize,
) -> DVector<T> {
    let relaxed = relaxation_update(adjacency, epsilons, x, n);
    let agents = adjacency.nrows();
    let mut out = DVector::zeros(agents * n);
    for k in 0..agents {
        out.rows_mut(k * n, n).copy_from(&(a * relaxed.rows(k * n, n)));
    }
    out
}

/// Discrete observer-based coupling.
///
/// `x_k(t+1)    = A x_k + B K eta_k`
/// `eta_k(t+1)  = (A + BK) eta_k + eps_k A sum_j l_kj (xhat_j - eta_j)`
/// `xhat_k(t+1) = A xhat_k + B K eta_k + H C (xhat_k - x_k)`
///
/// The observer propagates the control like the plant does and corrects with
/// the output error under the `A + HC` Schur convention, which makes the
/// estimation error satisfy `e(t+1) = (A + HC) e(t)` exactly.
#[allow(clippy::too_many_arguments)]
pub fn discrete_observer_step<T: Real>(
    a: &DMatrix<T>,
    bk: &DMatrix<T>,
    a_bk: &DMatrix<T>,
    hc: &DMatrix<T>,
    adjacency: &DMatrix<T>,
    epsilons: &[T],
    x: &DVector<T>,
    eta: &DVector<T>,
    xhat: &DVector<T>,
    n: usize,
) -> (DVector<T>, DVector<T>, DVector<T>) {
    let agents = adjacency.nrows();
    let s = xhat - eta;
    let mut nx = DVector::zeros(agents * n);
    let mut neta = DVector::zeros(agents * n);
    let mut nxhat = DVector::zeros(agents * n);
    for k in 0..agents {
        let xk = x.rows(k * n, n);
        let xhk = xhat.rows(k * n, n);
        let ek = eta.rows(k * n, n);
        let drive = bk * ek;

        // -sum_j l_kj s_j accumulated as the diffusive neighbor sum.
        let sk = s.rows(k * n, n).into_owned();
        let mut acc = DVector::<T>::zeros(n);
        for j in 0..agents {
            let w = adjacency[(k, j)];
            if w != T::zero() {
                acc += (s.rows(j * n, n) - &sk) * w;
            }
        }

        nx.rows_mut(k * n, n).copy_from(&(a * xk + &drive));
        neta.rows_mut(k * n, n).copy_from(&(a_bk * ek + (a * acc) * epsilons[k]));
        nxhat
            .rows_mut(k * n, n)
            .copy_from(&(a * xhk + &drive + hc * (xhk - xk)));
    }
    (nx, neta, nxhat)
}
