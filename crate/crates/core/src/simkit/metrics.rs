//! Synchronization metrics derived from simulation traces.

use super::{SimError, SimulationTrace};
use crate::matcore::expm;
use crate::plant::{Dynamics, LinearPlant};
use crate::Real;
use nalgebra::{DMatrix, DVector};

/// Norm of the disagreement component: distance of the stacked state from
/// the consensus subspace, `sqrt(sum_k |x_k - xbar|^2)`.
pub fn disagreement_norm<T: Real>(x: &DVector<T>, n: usize) -> T {
    let agents = x.len() / n;
    let mut mean = DVector::<T>::zeros(n);
    for k in 0..agents {
        mean += x.rows(k * n, n);
    }
    mean /= T::from_usize(agents).unwrap();
    let mut acc = T::zero();
    for k in 0..agents {
        let d = x.rows(k * n, n) - &mean;
        acc += d.norm_squared();
    }
    acc.sqrt()
}

/// Least-squares slope of `log(disagreement)` versus time over the tail
/// half of the samples.
///
/// Returns negative infinity when the disagreement is identically zero
/// (trivially synchronized) and zero when it underflows the floating-point
/// floor inside the tail.
pub fn fit_rate_from<T: Real>(times: &[T], disagreement: &[T]) -> Result<T, SimError> {
    if disagreement.iter().all(|&d| d == T::zero()) {
        return Ok(T::scalar(f64::NEG_INFINITY));
    }
    let (first, last) = match (times.first(), times.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(SimError::TraceTooShort("empty trace".into())),
    };
    let midpoint = (first + last) * T::scalar(0.5);
    let floor = T::underflow_floor();
    let tail: Vec<(T, T)> = times
        .iter()
        .zip(disagreement)
        .filter(|(t, _)| **t >= midpoint)
        .map(|(&t, &d)| (t, d))
        .collect();
    if tail.iter().any(|&(_, d)| d < floor) {
        return Ok(T::zero());
    }
    let positive: Vec<(T, T)> = tail.into_iter().filter(|&(_, d)| d > T::zero()).collect();
    if positive.len() < 10 {
        return Err(SimError::TooFewSamples { got: positive.len() });
    }

    let count = T::from_usize(positive.len()).unwrap();
    let mut sum_t = T::zero();
    let mut sum_y = T::zero();
    for &(t, d) in &positive {
        sum_t += t;
        sum_y += d.ln();
    }
    let mean_t = sum_t / count;
    let mean_y = sum_y / count;
    let mut cov = T::zero();
    let mut var = T::zero();
    for &(t, d) in &positive {
        let dt = t - mean_t;
        cov += dt * (d.ln() - mean_y);
        var += dt * dt;
    }
    if var == T::zero() {
        return Err(SimError::TraceTooShort("degenerate time axis".into()));
    }
    Ok(cov / var)
}

/// [`fit_rate_from`] applied to a trace.
pub fn fit_rate<T: Real>(trace: &SimulationTrace<T>) -> Result<T, SimError> {
    fit_rate_from(&trace.times, &trace.disagreement)
}

fn matrix_power<T: Real>(a: &DMatrix<T>, mut exponent: usize) -> DMatrix<T> {
    let n = a.nrows();
    let mut result = DMatrix::<T>::identity(n, n);
    let mut base = a.clone();
    while exponent > 0 {
        if exponent % 2 == 1 {
            result = &result * &base;
        }
        base = &base * &base;
        exponent /= 2;
    }
    result
}

/// Distance of the terminal network state from a genuine open-loop solution.
///
/// The average agent state at the midpoint sample is propagated under the
/// open-loop flow to the final time; the residual is the worst per-agent
/// terminal deviation, normalized by `1 + |xbar|`. Small values certify
/// convergence to a solution of the uncoupled dynamics rather than mere
/// mutual agreement.
pub fn openloop_residual<T: Real>(
    trace: &SimulationTrace<T>,
    plant: &LinearPlant<T>,
) -> Result<T, SimError> {
    if trace.len() < 2 {
        return Err(SimError::TraceTooShort(format!("{} samples", trace.len())));
    }
    let n = plant.state_dim();
    let t_first = trace.times[0];
    let t_last = trace.final_time();
    let midpoint = (t_first + t_last) * T::scalar(0.5);
    let mid_idx = trace
        .times
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            (**a - midpoint).abs().partial_cmp(&(**b - midpoint).abs()).unwrap()
        })
        .map(|(i, _)| i)
        .expect("nonempty trace");
    let t_mid = trace.times[mid_idx];

    let x_mid = &trace.states[mid_idx].x;
    let agents = x_mid.len() / n;
    let mut mean = DVector::<T>::zeros(n);
    for k in 0..agents {
        mean += x_mid.rows(k * n, n);
    }
    mean /= T::from_usize(agents).unwrap();

    let propagated = match plant.dynamics() {
        Dynamics::Continuous(a) => expm(a, t_last - t_mid)? * &mean,
        Dynamics::Discrete(a) => {
            let steps = ((t_last - t_mid) / trace.time_step)
                .round()
                .to_usize()
                .ok_or_else(|| SimError::TraceTooShort("bad discrete span".into()))?;
            matrix_power(a, steps) * &mean
        }
        Dynamics::Periodic(coeffs) => {
            let span = t_last - t_mid;
            let substeps = ((span / trace.time_step - T::scalar(1e-9)).ceil())
                .to_usize()
                .unwrap_or(1)
                .max(1);
            let h = span / T::from_usize(substeps).unwrap();
            let half = h * T::scalar(0.5);
            let mut state = mean.clone();
            for i in 0..substeps {
                let t = t_mid + h * T::from_usize(i).unwrap();
                let k1 = coeffs.at(t) * &state;
                let k2 = coeffs.at(t + half) * (&state + &k1 * half);
                let k3 = coeffs.at(t + half) * (&state + &k2 * half);
                let k4 = coeffs.at(t + h) * (&state + &k3 * h);
                state += (k1 + k2 * T::scalar(2.0) + k3 * T::scalar(2.0) + k4)
                    * (h / T::scalar(6.0));
            }
            state
        }
    };

    let x_end = &trace.final_state().x;
    let mut worst = T::zero();
    for k in 0..agents {
        let dev = (x_end.rows(k * n, n) - &propagated).norm();
        worst = T::max(worst, dev);
    }
    Ok(worst / (T::one() + mean.norm()))
}

/// Decision thresholds for the synchronization verdict.
#[derive(Debug, Clone, Copy)]
pub struct SyncThresholds<T: Real> {
    /// Final-to-initial disagreement ratio at or below which the run counts
    /// as synchronized.
    pub sync_ratio: T,
    /// Ratio at or above which (together with a non-decaying rate) the run
    /// counts as not synchronized.
    pub fail_ratio: T,
    /// Rate bound for the failure declaration.
    pub fail_rate: T,
}

impl<T: Real> Default for SyncThresholds<T> {
    fn default() -> Self {
        Self {
            sync_ratio: T::scalar(1e-3),
            fail_ratio: T::scalar(1e-1),
            fail_rate: T::scalar(-1e-3),
        }
    }
}

/// Three-way outcome; the band between the thresholds is inconclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncStatus {
    Synchronized,
    NotSynchronized,
    Inconclusive,
}

/// Synchronization verdict with its supporting numbers.
#[derive(Debug, Clone)]
pub struct SyncVerdict<T: Real> {
    pub status: SyncStatus,
    pub fitted_rate: T,
    pub final_ratio: T,
    pub openloop_residual: T,
    pub diverged: bool,
}

impl<T: Real> SyncVerdict<T> {
    pub fn synchronized(&self) -> bool {
        self.status == SyncStatus::Synchronized
    }
}

/// Evaluates the synchronization verdict of a trace against thresholds.
pub fn sync_verdict<T: Real>(
    trace: &SimulationTrace<T>,
    plant: &LinearPlant<T>,
    thresholds: &SyncThresholds<T>,
) -> Result<SyncVerdict<T>, SimError> {
    let d0 = trace.disagreement.first().copied().unwrap_or(T::zero());
    let d_end = trace.disagreement.last().copied().unwrap_or(T::zero());
    let floor = T::underflow_floor();
    let final_ratio = if d0 > floor {
        d_end / d0
    } else if d_end <= floor {
        T::zero()
    } else {
        T::scalar(f64::INFINITY)
    };
    let fitted_rate = fit_rate(trace)?;
    let residual = openloop_residual(trace, plant)?;

    let status = if trace.diverged {
        SyncStatus::NotSynchronized
    } else if final_ratio <= thresholds.sync_ratio
        && (fitted_rate < T::zero() || d_end <= floor)
    {
        SyncStatus::Synchronized
    } else if final_ratio >= thresholds.fail_ratio && fitted_rate >= thresholds.fail_rate {
        SyncStatus::NotSynchronized
    } else {
        SyncStatus::Inconclusive
    };

    Ok(SyncVerdict {
        status,
        fitted_rate,
        final_ratio,
        openloop_residual: residual,
        diverged: trace.diverged,
    })
}
