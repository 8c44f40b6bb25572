//! Deterministic simulation engine.
//!
//! Continuous closed loops are integrated with the classical fixed-step
//! fourth-order scheme; the time grid is refined so that every graph
//! switching instant is a grid point, which keeps runs reproducible and
//! lets traces be compared bitwise across restarts. Discrete closed loops
//! step on integer multiples of a sample period.

mod metrics;

pub use metrics::{
    disagreement_norm, fit_rate, fit_rate_from, openloop_residual, sync_verdict, SyncStatus,
    SyncThresholds, SyncVerdict,
};

use crate::controllers::{ClosedLoop, ControlError, NetworkState, StateLayout};
use crate::graphnet::GraphError;
use crate::matcore::MatError;
use crate::plant::PlantError;
use crate::Real;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// State-norm bound beyond which a run is declared divergent.
pub const OVERFLOW_GUARD: f64 = 1e12;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    BadConfig(String),
    #[error("initial state does not match the coupling-law layout")]
    BadInitialState,
    #[error("trace too short: {0}")]
    TraceTooShort(String),
    #[error("rate fit needs at least 10 positive samples, got {got}")]
    TooFewSamples { got: usize },
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// Time window, step size, recording cadence and the seed used for sampled
/// initial conditions.
#[derive(Debug, Clone, Copy)]
pub struct SimulationConfig<T: Real> {
    pub t0: T,
    pub t_end: T,
    pub step: T,
    pub record_every: usize,
    pub seed: u64,
}

impl<T: Real> SimulationConfig<T> {
    pub fn new(t0: T, t_end: T, step: T) -> Self {
        Self { t0, t_end, step, record_every: 1, seed: 0 }
    }

    /// Default step `1e-3 (t_end - t0)`, capped at `1e-2`.
    pub fn default_step(t0: T, t_end: T) -> T {
        T::min((t_end - t0) * T::scalar(1e-3), T::scalar(1e-2))
    }

    fn validate(&self) -> Result<(), SimError> {
        if !(self.step > T::zero()) {
            return Err(SimError::BadConfig("step must be positive".into()));
        }
        if self.t_end <= self.t0 {
            return Err(SimError::BadConfig("t_end must exceed t0".into()));
        }
        if self.record_every == 0 {
            return Err(SimError::BadConfig("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Time-indexed snapshots plus derived synchronization metrics.
#[derive(Debug, Clone)]
pub struct SimulationTrace<T: Real> {
    pub times: Vec<T>,
    pub states: Vec<NetworkState<T>>,
    /// Norm of the disagreement component of `x` at each snapshot.
    pub disagreement: Vec<T>,
    /// Norm of the stacked controller state, when the law carries one.
    pub controller_norm: Option<Vec<T>>,
    /// True when the overflow guard truncated the run.
    pub diverged: bool,
    /// Base step (continuous) or sample period (discrete) of the run.
    pub time_step: T,
    pub metadata: String,
}

impl<T: Real> SimulationTrace<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> T {
        *self.times.last().expect("nonempty trace")
    }

    pub fn final_state(&self) -> &NetworkState<T> {
        self.states.last().expect("nonempty trace")
    }
}

struct TraceBuilder<T: Real> {
    layout: StateLayout,
    state_dim: usize,
    times: Vec<T>,
    states: Vec<NetworkState<T>>,
    disagreement: Vec<T>,
    controller_norm: Option<Vec<T>>,
}

impl<T: Real> TraceBuilder<T> {
    fn new(layout: StateLayout) -> Self {
        Self {
            layout,
            state_dim: layout.state_dim,
            times: Vec::new(),
            states: Vec::new(),
            disagreement: Vec::new(),
            controller_norm: layout.has_eta.then(Vec::new),
        }
    }

    fn push(&mut self, t: T, flat: &DVector<T>) {
        let state = NetworkState::from_flat(self.layout, flat);
        self.times.push(t);
        self.disagreement.push(disagreement_norm(&state.x, self.state_dim));
        if let (Some(norms), Some(eta)) = (self.controller_norm.as_mut(), state.eta.as_ref()) {
            norms.push(eta.norm());
        }
        self.states.push(state);
    }

    fn finish(self, diverged: bool, time_step: T, metadata: String) -> SimulationTrace<T> {
        SimulationTrace {
            times: self.times,
            states: self.states,
            disagreement: self.disagreement,
            controller_norm: self.controller_norm,
            diverged,
            time_step,
            metadata,
        }
    }
}

fn blown_up<T: Real>(flat: &DVector<T>) -> bool {
    let guard = T::scalar(OVERFLOW_GUARD);
    flat.iter().any(|v| !v.is_finite() || v.abs() > guard)
}

/// Integrates a continuous closed loop over the configured window.
///
/// Every graph switching instant is a grid point: each constant-adjacency
/// span is subdivided into equal steps no longer than `cfg.step`. On state
/// overflow the run stops early and the partial trace is returned with the
/// divergence flag set.
pub fn integrate<T: Real>(
    closed_loop: &ClosedLoop<T>,
    init: &NetworkState<T>,
    cfg: &SimulationConfig<T>,
) -> Result<SimulationTrace<T>, SimError> {
    cfg.validate()?;
    if closed_loop.is_discrete() {
        return Err(SimError::BadConfig("discrete law: use step_discrete".into()));
    }
    let layout = closed_loop.layout();
    if !init.matches(layout) {
        return Err(SimError::BadInitialState);
    }

    let spans = closed_loop.graph().piecewise_spans(cfg.t0, cfg.t_end)?;
    let mut flat = init.flatten();
    let mut builder = TraceBuilder::new(layout);
    builder.push(cfg.t0, &flat);

    let half = T::scalar(0.5);
    let two = T::scalar(2.0);
    let six = T::scalar(6.0);
    let mut grid_index: usize = 0;
    let mut diverged = false;

    'spans: for (span_start, span_end, seg_idx) in spans {
        let adjacency = closed_loop.graph().segments()[seg_idx].adjacency.clone();
        let span = span_end - span_start;
        let substeps = ((span / cfg.step - T::scalar(1e-9)).ceil())
            .to_usize()
            .unwrap_or(1)
            .max(1);
        let h = span / T::from_usize(substeps).unwrap();
        for i in 0..substeps {
            let t = span_start + h * T::from_usize(i).unwrap();
            let k1 = closed_loop.rhs_flat_with_adjacency(&adjacency, t, &flat);
            let k2 = closed_loop
                .rhs_flat_with_adjacency(&adjacency, t + h * half, &(&flat + &k1 * (h * half)));
            let k3 = closed_loop
                .rhs_flat_with_adjacency(&adjacency, t + h * half, &(&flat + &k2 * (h * half)));
            let k4 =
                closed_loop.rhs_flat_with_adjacency(&adjacency, t + h, &(&flat + &k3 * h));
            flat += (k1 + k2 * two + k3 * two + k4) * (h / six);
            grid_index += 1;

            if blown_up(&flat) {
                diverged = true;
                builder.push(t + h, &flat);
                break 'spans;
            }
            let t_next = if i + 1 == substeps { span_end } else { t + h };
            if grid_index % cfg.record_every == 0 {
                builder.push(t_next, &flat);
            }
        }
    }

    if !diverged && builder.times.last().copied() != Some(cfg.t_end) {
        builder.push(cfg.t_end, &flat);
    }
    Ok(builder.finish(diverged, cfg.step, String::new()))
}

/// Steps a discrete closed loop; the time grid is `t0 + k * step`.
pub fn step_discrete<T: Real>(
    closed_loop: &ClosedLoop<T>,
    init: &NetworkState<T>,
    cfg: &SimulationConfig<T>,
) -> Result<SimulationTrace<T>, SimError> {
    cfg.validate()?;
    if !closed_loop.is_discrete() {
        return Err(SimError::BadConfig("continuous law: use integrate".into()));
    }
    let layout = closed_loop.layout();
    if !init.matches(layout) {
        return Err(SimError::BadInitialState);
    }

    let total = ((cfg.t_end - cfg.t0) / cfg.step + T::scalar(1e-9))
        .floor()
        .to_usize()
        .ok_or_else(|| SimError::BadConfig("window does not fit usize steps".into()))?;

    let mut flat = init.flatten();
    let mut builder = TraceBuilder::new(layout);
    builder.push(cfg.t0, &flat);
    let mut diverged = false;

    for k in 0..total {
        let t = cfg.t0 + cfg.step * T::from_usize(k).unwrap();
        let adjacency = closed_loop.graph().adjacency_at(t)?.clone();
        flat = closed_loop.step_flat_with_adjacency(&adjacency, &flat);
        let t_next = cfg.t0 + cfg.step * T::from_usize(k + 1).unwrap();
        if blown_up(&flat) {
            diverged = true;
            builder.push(t_next, &flat);
            break;
        }
        if (k + 1) % cfg.record_every == 0 || k + 1 == total {
            builder.push(t_next, &flat);
        }
    }
    Ok(builder.finish(diverged, cfg.step, String::new()))
}

/// Initial condition with every coordinate of `x` drawn uniformly from
/// `[-amplitude, amplitude]`; controller and observer states start at zero.
pub fn sample_initial_state<T: Real>(
    layout: StateLayout,
    seed: u64,
    amplitude: f64,
) -> NetworkState<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = layout.block_len();
    let x = DVector::from_fn(len, |_, _| {
        T::scalar(rng.gen_range(-amplitude..=amplitude))
    });
    NetworkState {
        x,
        eta: layout.has_eta.then(|| DVector::zeros(len)),
        xhat: layout.has_xhat.then(|| DVector::zeros(len)),
    }
}
