//! The coupling-law family and the closed-loop network dynamics they induce.
//!
//! Every law couples identical agents through neighbor differences, so the
//! coupling vanishes on the synchronized manifold and each agent then
//! follows its open-loop dynamics. [`ClosedLoop`] validates a law against a
//! plant and a graph once, then evaluates the network vector field (or
//! next-state map, for discrete laws).

mod certificates;
mod discrete;

pub use certificates::{
    incidence_factor, network_lyapunov, observability_gramian, passivity_candidates,
    passivity_check, GramianReport, PassivityCertificate,
};
pub use discrete::{
    consensus_step_discrete, discrete_observer_step, discrete_static_inverse_b_step,
};

use crate::graphnet::{GraphError, SwitchingGraph};
use crate::matcore::{
    classify_spectrum, condition_number, lu_solve, DenseMatrix, MatError, StabilityClass,
    TimeDomain, SINGULAR_CONDITION,
};
use crate::plant::{LinearPlant, PlantError, PlantKind};
use crate::Real;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("coupling law '{law}' requires a {expected} plant, got {got}")]
    WrongPlantKind { law: &'static str, expected: &'static str, got: &'static str },
    #[error("coupling law requires an output map C")]
    MissingOutput,
    #[error("diffusive output coupling feeds p outputs into m inputs; need m = p, got m = {m}, p = {p}")]
    InputOutputMismatch { m: usize, p: usize },
    #[error("gain {name} must be {rows}x{cols}, got {got_rows}x{got_cols}")]
    BadGainShape { name: &'static str, rows: usize, cols: usize, got_rows: usize, got_cols: usize },
    #[error("A + BK is not {target} (classification {class:?})")]
    ControllerGainNotStabilizing { target: &'static str, class: StabilityClass },
    #[error("A + HC is not {target} (classification {class:?})")]
    ObserverGainNotStabilizing { target: &'static str, class: StabilityClass },
    #[error("B is not invertible: condition number {condition:.3e}")]
    BNotInvertible { condition: f64 },
    #[error(
        "epsilon[{agent}] = {value} violates the open interval (0, {bound}) \
         (in-degree {degree} in segment {segment})"
    )]
    EpsilonOutOfRange { agent: usize, value: f64, bound: f64, degree: f64, segment: usize },
    #[error("expected {expected} epsilon entries, got {got}")]
    EpsilonCount { expected: usize, got: usize },
    #[error("state has wrong shape: {0}")]
    BadState(String),
    #[error("adjacency must be symmetric for the incidence factorization L = D D^T")]
    AsymmetricGraph,
    #[error("candidate P must be a symmetric {n}x{n} matrix")]
    BadCertificateShape { n: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// The coupling-law family, with variant-specific gain data.
#[derive(Debug, Clone)]
pub enum CouplingLaw<T: Real> {
    /// `u_k = B^{-1} sum a_kj (x_j - x_k)` for invertible `B` (continuous).
    StaticStateInverseB,
    /// Dynamic state feedback: controller state diffuses, `u_k = K eta_k`.
    DynamicState { k: DenseMatrix<T> },
    /// Dynamic output feedback through a Luenberger observer.
    DynamicOutputObserver { k: DenseMatrix<T>, h: DenseMatrix<T> },
    /// Static diffusive output coupling `u_k = sum a_kj (y_j - y_k)`.
    StaticDiffusiveOutput,
    /// Discrete-time analogue of the invertible-`B` state coupling.
    DiscreteStaticInverseB { epsilons: Vec<T> },
    /// Discrete-time observer controller.
    DiscreteDynamicOutputObserver { k: DenseMatrix<T>, h: DenseMatrix<T>, epsilons: Vec<T> },
    /// Invertible-`B` state coupling on a periodic plant.
    PeriodicStaticInverseB,
}

impl<T: Real> CouplingLaw<T> {
    pub fn name(&self) -> &'static str {
        match self {
            CouplingLaw::StaticStateInverseB => "static-state-inverse-b",
            CouplingLaw::DynamicState { .. } => "dynamic-state",
            CouplingLaw::DynamicOutputObserver { .. } => "dynamic-output-observer",
            CouplingLaw::StaticDiffusiveOutput => "static-diffusive-output",
            CouplingLaw::DiscreteStaticInverseB { .. } => "discrete-static-inverse-b",
            CouplingLaw::DiscreteDynamicOutputObserver { .. } => {
                "discrete-dynamic-output-observer"
            }
            CouplingLaw::PeriodicStaticInverseB => "periodic-static-inverse-b",
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(
            self,
            CouplingLaw::DiscreteStaticInverseB { .. }
                | CouplingLaw::DiscreteDynamicOutputObserver { .. }
        )
    }

    pub fn needs_eta(&self) -> bool {
        matches!(
            self,
            CouplingLaw::DynamicState { .. }
                | CouplingLaw::DynamicOutputObserver { .. }
                | CouplingLaw::DiscreteDynamicOutputObserver { .. }
        )
    }

    pub fn needs_xhat(&self) -> bool {
        matches!(
            self,
            CouplingLaw::DynamicOutputObserver { .. }
                | CouplingLaw::DiscreteDynamicOutputObserver { .. }
        )
    }
}

/// Shape of the stacked network state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub agents: usize,
    pub state_dim: usize,
    pub has_eta: bool,
    pub has_xhat: bool,
}

impl StateLayout {
    pub fn block_len(&self) -> usize {
        self.agents * self.state_dim
    }

    pub fn flat_len(&self) -> usize {
        let blocks = 1 + usize::from(self.has_eta) + usize::from(self.has_xhat);
        blocks * self.block_len()
    }
}

/// Stacked agent states plus optional controller and observer states.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState<T: Real> {
    pub x: DVector<T>,
    pub eta: Option<DVector<T>>,
    pub xhat: Option<DVector<T>>,
}

impl<T: Real> NetworkState<T> {
    pub fn states_only(x: DVector<T>) -> Self {
        Self { x, eta: None, xhat: None }
    }

    pub fn zeros(layout: StateLayout) -> Self {
        let len = layout.block_len();
        Self {
            x: DVector::zeros(len),
            eta: layout.has_eta.then(|| DVector::zeros(len)),
            xhat: layout.has_xhat.then(|| DVector::zeros(len)),
        }
    }

    pub fn matches(&self, layout: StateLayout) -> bool {
        self.x.len() == layout.block_len()
            && self.eta.is_some() == layout.has_eta
            && self.xhat.is_some() == layout.has_xhat
            && self.eta.as_ref().is_none_or(|v| v.len() == layout.block_len())
            && self.xhat.as_ref().is_none_or(|v| v.len() == layout.block_len())
    }

    pub fn flatten(&self) -> DVector<T> {
        let mut parts: Vec<T> = Vec::with_capacity(
            self.x.len()
                + self.eta.as_ref().map_or(0, |v| v.len())
                + self.xhat.as_ref().map_or(0, |v| v.len()),
        );
        parts.extend(self.x.iter().copied());
        if let Some(eta) = &self.eta {
            parts.extend(eta.iter().copied());
        }
        if let Some(xhat) = &self.xhat {
            parts.extend(xhat.iter().copied());
        }
        DVector::from_vec(parts)
    }

    pub fn from_flat(layout: StateLayout, flat: &DVector<T>) -> Self {
        let len = layout.block_len();
        let x = flat.rows(0, len).into_owned();
        let mut offset = len;
        let eta = layout.has_eta.then(|| {
            let v = flat.rows(offset, len).into_owned();
            offset += len;
            v
        });
        let xhat = layout.has_xhat.then(|| flat.rows(offset, len).into_owned());
        Self { x, eta, xhat }
    }
}

/// Per-agent coupling sum `sum_j a_kj (v_j - v_k)` for every agent,
/// written into a stacked vector.
fn diffusive_coupling<T: Real>(
    adjacency: &DMatrix<T>,
    v: &DVector<T>,
    n: usize,
) -> DVector<T> {
    let agents = adjacency.nrows();
    let mut out = DVector::zeros(agents * n);
    for k in 0..agents {
        let vk = v.rows(k * n, n);
        let mut acc = DVector::<T>::zeros(n);
        for j in 0..agents {
            let w = adjacency[(k, j)];
            if w != T::zero() {
                acc += (v.rows(j * n, n) - &vk) * w;
            }
        }
        out.rows_mut(k * n, n).copy_from(&acc);
    }
    out
}

/// Classical consensus vector field `xdot_k = sum_j a_kj (x_j - x_k)`,
/// evaluated agent by agent.
pub fn consensus_rhs<T: Real>(adjacency: &DMatrix<T>, x: &DVector<T>, n: usize) -> DVector<T> {
    diffusive_coupling(adjacency, x, n)
}

/// The same consensus field in compact Kronecker form `-(L (x) I_n) x`.
///
/// Kept as a second algebraic route; the two must agree to rounding.
pub fn consensus_rhs_kron<T: Real>(
    laplacian: &DMatrix<T>,
    x: &DVector<T>,
    n: usize,
) -> DVector<T> {
    let lhat = laplacian.kronecker(&DMatrix::<T>::identity(n, n));
    -(lhat * x)
}

/// Invertible-`B` state coupling in cancelled form:
/// `xdot_k = A x_k + sum_j a_kj (x_j - x_k)`.
pub fn static_state_rhs<T: Real>(
    a_now: &DMatrix<T>,
    adjacency: &DMatrix<T>,
    x: &DVector<T>,
    n: usize,
) -> DVector<T> {
    let agents = adjacency.nrows();
    let mut out = diffusive_coupling(adjacency, x, n);
    for k in 0..agents {
        let xk = x.rows(k * n, n);
        let mut block = out.rows_mut(k * n, n);
        block += a_now * xk;
    }
    out
}

/// Uncancelled form of the invertible-`B` coupling: the control
/// `u_k = B^{-1} sum_j a_kj (x_j - x_k)` is materialized and fed through
/// `B`. Cross-check route for [`static_state_rhs`].
pub fn static_state_rhs_uncancelled<T: Real>(
    a_now: &DMatrix<T>,
    b: &DMatrix<T>,
    adjacency: &DMatrix<T>,
    x: &DVector<T>,
    n: usize,
) -> Result<DVector<T>, ControlError> {
    let condition = condition_number(b);
    if b.nrows() != b.ncols() || condition > T::scalar(SINGULAR_CONDITION) {
        return Err(ControlError::BNotInvertible {
            condition: condition.to_f64().unwrap_or(f64::INFINITY),
        });
    }
    let agents = adjacency.nrows();
    let coupling = diffusive_coupling(adjacency, x, n);
    let mut out = DVector::zeros(agents * n);
    for k in 0..agents {
        let u = lu_solve(b, &DMatrix::from_column_slice(n, 1, coupling.rows(k * n, n).as_slice()))?;
        let xk = x.rows(k * n, n);
        out.rows_mut(k * n, n).copy_from(&(a_now * xk + b * u));
    }
    Ok(out)
}

/// Dynamic state-feedback closed loop:
/// `xdot_k = A x_k + B K eta_k`,
/// `etadot_k = (A + BK) eta_k + sum_j a_kj (eta_j - eta_k + x_k - x_j)`.
pub fn dynamic_state_rhs<T: Real>(
    a: &DMatrix<T>,
    bk: &DMatrix<T>,
    a_bk: &DMatrix<T>,
    adjacency: &DMatrix<T>,
    x: &DVector<T>,
    eta: &DVector<T>,
    n: usize,
) -> (DVector<T>, DVector<T>) {
    let agents = adjacency.nrows();
    let mut dx = DVector::zeros(agents * n);
    // eta_j - eta_k + x_k - x_j accumulated as coupling(eta) - coupling(x).
    let mut deta = diffusive_coupling(adjacency, eta, n) - diffusive_coupling(adjacency, x, n);
    for k in 0..agents {
        let xk = x.rows(k * n, n);
        let ek = eta.rows(k * n, n);
        dx.rows_mut(k * n, n).copy_from(&(a * xk + bk * ek));
        let mut block = deta.rows_mut(k * n, n);
        block += a_bk * ek;
    }
    (dx, deta)
}

/// Observer-based dynamic output feedback: the controller state diffuses
/// against observer estimates, the observer corrects with the output error.
#[allow(clippy::too_many_arguments)]
pub fn output_observer_rhs<T: Real>(
    a: &DMatrix<T>,
    bk: &DMatrix<T>,
    a_bk: &DMatrix<T>,
    hc: &DMatrix<T>,
    adjacency: &DMatrix<T>,
    x: &DVector<T>,
    eta: &DVector<T>,
    xhat: &DVector<T>,
    n: usize,
) -> (DVector<T>, DVector<T>, DVector<T>) {
    let agents = adjacency.nrows();
    let mut dx = DVector::zeros(agents * n);
    let mut dxhat = DVector::zeros(agents * n);
    let mut deta = diffusive_coupling(adjacency, eta, n) - diffusive_coupling(adjacency, xhat, n);
    for k in 0..agents {
        let xk = x.rows(k * n, n);
        let xhk = xhat.rows(k * n, n);
        let ek = eta.rows(k * n, n);
        let drive = bk * ek;
        dx.rows_mut(k * n, n).copy_from(&(a * xk + &drive));
        // H (yhat - y) = H C (xhat - x)
        dxhat
            .rows_mut(k * n, n)
            .copy_from(&(a * xhk + &drive + hc * (xhk - xk)));
        let mut block = deta.rows_mut(k * n, n);
        block += a_bk * ek;
    }
    (dx, deta, dxhat)
}

/// Static diffusive output coupling `xdot_k = A x_k + B sum_j a_kj C (x_j - x_k)`.
pub fn static_output_rhs<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    c: &DMatrix<T>,
    adjacency: &DMatrix<T>,
    x: &DVector<T>,
    n: usize,
) -> DVector<T> {
    let agents = adjacency.nrows();
    let p = c.nrows();
    let y = {
        let mut y = DVector::zeros(agents * p);
        for k in 0..agents {
            y.rows_mut(k * p, p).copy_from(&(c * x.rows(k * n, n)));
        }
        y
    };
    let u = diffusive_coupling(adjacency, &y, p);
    let mut out = DVector::zeros(agents * n);
    for k in 0..agents {
        let xk = x.rows(k * n, n);
        out.rows_mut(k * n, n).copy_from(&(a * xk + b * u.rows(k * p, p)));
    }
    out
}

/// A coupling law bound to a plant and a graph, validated once.
#[derive(Debug, Clone)]
pub struct ClosedLoop<T: Real> {
    plant: LinearPlant<T>,
    graph: SwitchingGraph<T>,
    law: CouplingLaw<T>,
    // Cached gain products for the dynamic variants.
    bk: Option<DenseMatrix<T>>,
    a_bk: Option<DenseMatrix<T>>,
    hc: Option<DenseMatrix<T>>,
}

impl<T: Real> ClosedLoop<T> {
    pub fn new(
        plant: LinearPlant<T>,
        graph: SwitchingGraph<T>,
        law: CouplingLaw<T>,
    ) -> Result<Self, ControlError> {
        let n = plant.state_dim();
        let m = plant.input_dim();
        let tol = T::scalar(crate::matcore::DEFAULT_SPECTRAL_TOL);

        let expect_kind = |expected: PlantKind, name: &'static str| -> Result<(), ControlError> {
            if plant.kind() != expected {
                return Err(ControlError::WrongPlantKind {
                    law: name,
                    expected: kind_name(expected),
                    got: kind_name(plant.kind()),
                });
            }
            Ok(())
        };

        let check_k = |k: &DenseMatrix<T>| -> Result<(), ControlError> {
            if k.nrows() != m || k.ncols() != n {
                return Err(ControlError::BadGainShape {
                    name: "K",
                    rows: m,
                    cols: n,
                    got_rows: k.nrows(),
                    got_cols: k.ncols(),
                });
            }
            Ok(())
        };

        let check_b_invertible = || -> Result<(), ControlError> {
            let verdict = plant.b_invertibility();
            if !verdict.invertible {
                return Err(ControlError::BNotInvertible {
                    condition: verdict
                        .condition
                        .and_then(|c| c.to_f64())
                        .unwrap_or(f64::INFINITY),
                });
            }
            Ok(())
        };

        let mut bk = None;
        let mut a_bk = None;
        let mut hc = None;

        match &law {
            CouplingLaw::StaticStateInverseB => {
                expect_kind(PlantKind::Continuous, law.name())?;
                check_b_invertible()?;
            }
            CouplingLaw::PeriodicStaticInverseB => {
                expect_kind(PlantKind::Periodic, law.name())?;
                check_b_invertible()?;
            }
            CouplingLaw::DynamicState { k } => {
                expect_kind(PlantKind::Continuous, law.name())?;
                check_k(k)?;
                let a = plant.a().expect("continuous plant has a constant A");
                let closed = a + plant.b() * k;
                let class = classify_spectrum(&closed, TimeDomain::Continuous, tol)?;
                if class.classification != StabilityClass::Hurwitz {
                    return Err(ControlError::ControllerGainNotStabilizing {
                        target: "Hurwitz",
                        class: class.classification,
                    });
                }
                bk = Some(plant.b() * k);
                a_bk = Some(closed);
            }
            CouplingLaw::DynamicOutputObserver { k, h } => {
                expect_kind(PlantKind::Continuous, law.name())?;
                check_k(k)?;
                let c = plant.c().ok_or(ControlError::MissingOutput)?;
                let p = c.nrows();
                if h.nrows() != n || h.ncols() != p {
                    return Err(ControlError::BadGainShape {
                        name: "H",
                        rows: n,
                        cols: p,
                        got_rows: h.nrows(),
                        got_cols: h.ncols(),
                    });
                }
                let a = plant.a().expect("continuous plant has a constant A");
                let closed = a + plant.b() * k;
                let class = classify_spectrum(&closed, TimeDomain::Continuous, tol)?;
                if class.classification != StabilityClass::Hurwitz {
                    return Err(ControlError::ControllerGainNotStabilizing {
                        target: "Hurwitz",
                        class: class.classification,
                    });
                }
                let observer = a + h * c;
                let class = classify_spectrum(&observer, TimeDomain::Continuous, tol)?;
                if class.classification != StabilityClass::Hurwitz {
                    return Err(ControlError::ObserverGainNotStabilizing {
                        target: "Hurwitz",
                        class: class.classification,
                    });
                }
                bk = Some(plant.b() * k);
                a_bk = Some(closed);
                hc = Some(h * c);
            }
            CouplingLaw::StaticDiffusiveOutput => {
                expect_kind(PlantKind::Continuous, law.name())?;
                let c = plant.c().ok_or(ControlError::MissingOutput)?;
                if c.nrows() != m {
                    return Err(ControlError::InputOutputMismatch { m, p: c.nrows() });
                }
            }
            CouplingLaw::DiscreteStaticInverseB { epsilons } => {
                expect_kind(PlantKind::Discrete, law.name())?;
                check_b_invertible()?;
                validate_epsilons(&graph, epsilons)?;
            }
            CouplingLaw::DiscreteDynamicOutputObserver { k, h, epsilons } => {
                expect_kind(PlantKind::Discrete, law.name())?;
                check_k(k)?;
                let c = plant.c().ok_or(ControlError::MissingOutput)?;
                let p = c.nrows();
                if h.nrows() != n || h.ncols() != p {
                    return Err(ControlError::BadGainShape {
                        name: "H",
                        rows: n,
                        cols: p,
                        got_rows: h.nrows(),
                        got_cols: h.ncols(),
                    });
                }
                validate_epsilons(&graph, epsilons)?;
                let a = plant.a().expect("discrete plant has a constant A");
                let closed = a + plant.b() * k;
                let class = classify_spectrum(&closed, TimeDomain::Discrete, tol)?;
                if class.classification != StabilityClass::Schur {
                    return Err(ControlError::ControllerGainNotStabilizing {
                        target: "Schur",
                        class: class.classification,
                    });
                }
                let observer = a + h * c;
                let class = classify_spectrum(&observer, TimeDomain::Discrete, tol)?;
                if class.classification != StabilityClass::Schur {
                    return Err(ControlError::ObserverGainNotStabilizing {
                        target: "Schur",
                        class: class.classification,
                    });
                }
                bk = Some(plant.b() * k);
                a_bk = Some(closed);
                hc = Some(h * c);
            }
        }

        Ok(Self { plant, graph, law, bk, a_bk, hc })
    }

    pub fn plant(&self) -> &LinearPlant<T> {
        &self.plant
    }

    pub fn graph(&self) -> &SwitchingGraph<T> {
        &self.graph
    }

    pub fn law(&self) -> &CouplingLaw<T> {
        &self.law
    }

    pub fn agent_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout {
            agents: self.graph.node_count(),
            state_dim: self.plant.state_dim(),
            has_eta: self.law.needs_eta(),
            has_xhat: self.law.needs_xhat(),
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.law.is_discrete()
    }

    fn check_state(&self, state: &NetworkState<T>) -> Result<(), ControlError> {
        if !state.matches(self.layout()) {
            return Err(ControlError::BadState(format!(
                "layout {:?} (x len {}, eta {}, xhat {})",
                self.layout(),
                state.x.len(),
                state.eta.is_some(),
                state.xhat.is_some()
            )));
        }
        Ok(())
    }

    /// Continuous closed-loop vector field at time `t`.
    pub fn rhs(&self, t: T, state: &NetworkState<T>) -> Result<NetworkState<T>, ControlError> {
        if self.is_discrete() {
            return Err(ControlError::WrongPlantKind {
                law: self.law.name(),
                expected: "continuous",
                got: "discrete",
            });
        }
        self.check_state(state)?;
        let adjacency = self.graph.adjacency_at(t)?.clone();
        let flat = state.flatten();
        let dflat = self.rhs_flat_with_adjacency(&adjacency, t, &flat);
        Ok(NetworkState::from_flat(self.layout(), &dflat))
    }

    /// Vector field with an explicitly frozen adjacency matrix.
    ///
    /// The integrator resolves the switching schedule itself and evaluates
    /// stage derivatives against the segment's adjacency; a periodic plant
    /// matrix still varies with `t` inside a segment.
    pub fn rhs_flat_with_adjacency(
        &self,
        adjacency: &DenseMatrix<T>,
        t: T,
        flat: &DVector<T>,
    ) -> DVector<T> {
        let layout = self.layout();
        let n = layout.state_dim;
        let len = layout.block_len();
        let x = flat.rows(0, len).into_owned();
        match &self.law {
            CouplingLaw::StaticStateInverseB => {
                let a = self.plant.a().expect("validated continuous");
                static_state_rhs(a, adjacency, &x, n)
            }
            CouplingLaw::PeriodicStaticInverseB => {
                let a = self.plant.a_at(t);
                static_state_rhs(&a, adjacency, &x, n)
            }
            CouplingLaw::DynamicState { .. } => {
                let eta = flat.rows(len, len).into_owned();
                let a = self.plant.a().expect("validated continuous");
                let (dx, deta) = dynamic_state_rhs(
                    a,
                    self.bk.as_ref().expect("cached at construction"),
                    self.a_bk.as_ref().expect("cached at construction"),
                    adjacency,
                    &x,
                    &eta,
                    n,
                );
                stack2(&dx, &deta)
            }
            CouplingLaw::DynamicOutputObserver { .. } => {
                let eta = flat.rows(len, len).into_owned();
                let xhat = flat.rows(2 * len, len).into_owned();
                let a = self.plant.a().expect("validated continuous");
                let (dx, deta, dxhat) = output_observer_rhs(
                    a,
                    self.bk.as_ref().expect("cached at construction"),
                    self.a_bk.as_ref().expect("cached at construction"),
                    self.hc.as_ref().expect("cached at construction"),
                    adjacency,
                    &x,
                    &eta,
                    &xhat,
                    n,
                );
                stack3(&dx, &deta, &dxhat)
            }
            CouplingLaw::StaticDiffusiveOutput => {
                let a = self.plant.a().expect("validated continuous");
                let c = self.plant.c().expect("validated at construction");
                static_output_rhs(a, self.plant.b(), c, adjacency, &x, n)
            }
            CouplingLaw::DiscreteStaticInverseB { .. }
            | CouplingLaw::DiscreteDynamicOutputObserver { .. } => {
                unreachable!("discrete laws have no vector field")
            }
        }
    }

    /// Discrete closed-loop next-state map at time `t`.
    pub fn step(&self, t: T, state: &NetworkState<T>) -> Result<NetworkState<T>, ControlError> {
        if !self.is_discrete() {
            return Err(ControlError::WrongPlantKind {
                law: self.law.name(),
                expected: "discrete",
                got: "continuous",
            });
        }
        self.check_state(state)?;
        let adjacency = self.graph.adjacency_at(t)?.clone();
        let flat = state.flatten();
        let next = self.step_flat_with_adjacency(&adjacency, &flat);
        Ok(NetworkState::from_flat(self.layout(), &next))
    }

    /// Next-state map with an explicitly frozen adjacency matrix.
    pub fn step_flat_with_adjacency(
        &self,
        adjacency: &DenseMatrix<T>,
        flat: &DVector<T>,
    ) -> DVector<T> {
        let layout = self.layout();
        let n = layout.state_dim;
        let len = layout.block_len();
        let x = flat.rows(0, len).into_owned();
        match &self.law {
            CouplingLaw::DiscreteStaticInverseB { epsilons } => {
                let a = self.plant.a().expect("validated discrete");
                discrete_static_inverse_b_step(a, adjacency, epsilons, &x, n)
            }
            CouplingLaw::DiscreteDynamicOutputObserver { epsilons, .. } => {
                let eta = flat.rows(len, len).into_owned();
                let xhat = flat.rows(2 * len, len).into_owned();
                let a = self.plant.a().expect("validated discrete");
                let (nx, neta, nxhat) = discrete_observer_step(
                    a,
                    self.bk.as_ref().expect("cached at construction"),
                    self.a_bk.as_ref().expect("cached at construction"),
                    self.hc.as_ref().expect("cached at construction"),
                    adjacency,
                    epsilons,
                    &x,
                    &eta,
                    &xhat,
                    n,
                );
                stack3(&nx, &neta, &nxhat)
            }
            _ => unreachable!("continuous laws have no step map"),
        }
    }
}

fn kind_name(kind: PlantKind) -> &'static str {
    match kind {
        PlantKind::Continuous => "continuous",
        PlantKind::Discrete => "discrete",
        PlantKind::Periodic => "periodic",
    }
}

fn stack2<T: Real>(a: &DVector<T>, b: &DVector<T>) -> DVector<T> {
    let mut out = DVector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

fn stack3<T: Real>(a: &DVector<T>, b: &DVector<T>, c: &DVector<T>) -> DVector<T> {
    let mut out = DVector::zeros(a.len() + b.len() + c.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out.rows_mut(a.len() + b.len(), c.len()).copy_from(c);
    out
}

/// Enforces `epsilon_k` in the open interval `(0, 1/d_k^in)` against every
/// segment of the schedule.
fn validate_epsilons<T: Real>(
    graph: &SwitchingGraph<T>,
    epsilons: &[T],
) -> Result<(), ControlError> {
    let agents = graph.node_count();
    if epsilons.len() != agents {
        return Err(ControlError::EpsilonCount { expected: agents, got: epsilons.len() });
    }
    for (s, seg) in graph.segments().iter().enumerate() {
        for (k, &eps) in epsilons.iter().enumerate() {
            let degree: T = seg.adjacency.row(k).sum();
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
                    segment: s,
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::matrix_from_rows;
    use approx::assert_relative_eq;

    fn complete_graph(n: usize) -> SwitchingGraph<f64> {
        let adj = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 });
        SwitchingGraph::time_invariant(adj, 1.0, 1.0).unwrap()
    }

    fn ring4() -> SwitchingGraph<f64> {
        let adj = matrix_from_rows(&[
            vec![0.0, 0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        SwitchingGraph::time_invariant(adj, 1.0, 1.0).unwrap()
    }

    fn harmonic() -> (DMatrix<f64>, DMatrix<f64>) {
        (
            matrix_from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap(),
            matrix_from_rows(&[vec![0.0], vec![1.0]]).unwrap(),
        )
    }

    fn seeded_vector(len: usize, seed: u64) -> DVector<f64> {
        // Cheap deterministic pseudo-random values in [-1, 1].
        let mut state = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1);
        DVector::from_fn(len, |_, _| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 20_000) as f64 / 10_000.0 - 1.0
        })
    }

    #[test]
    fn consensus_rhs_vanishes_on_consensus() {
        let g = complete_graph(3);
        let x = DVector::from_vec(vec![0.7, -0.2, 0.7, -0.2, 0.7, -0.2]);
        let dx = consensus_rhs(g.adjacency_at(0.0).unwrap(), &x, 2);
        assert!(dx.amax() < 1e-15);
    }

    #[test]
    fn consensus_rhs_two_scalar_agents() {
        let g = complete_graph(2);
        let x = DVector::from_vec(vec![1.0, 3.0]);
        let dx = consensus_rhs(g.adjacency_at(0.0).unwrap(), &x, 1);
        assert_relative_eq!(dx[0], 2.0);
        assert_relative_eq!(dx[1], -2.0);
    }

    #[test]
    fn consensus_rhs_agrees_with_kron_route() {
        let g = ring4();
        let x = seeded_vector(4 * 3, 7);
        let per_agent = consensus_rhs(g.adjacency_at(0.0).unwrap(), &x, 3);
        let kron_form = consensus_rhs_kron(&g.laplacian(0.0).unwrap(), &x, 3);
        assert!((per_agent - kron_form).amax() <= 1e-12);
    }

    #[test]
    fn static_state_reduces_to_consensus_for_zero_a() {
        let g = ring4();
        let x = seeded_vector(4 * 2, 8);
        let a = DMatrix::<f64>::zeros(2, 2);
        let dx = static_state_rhs(&a, g.adjacency_at(0.0).unwrap(), &x, 2);
        let cons = consensus_rhs(g.adjacency_at(0.0).unwrap(), &x, 2);
        assert!((dx - cons).amax() < 1e-15);
    }

    #[test]
    fn static_state_on_synchronized_manifold_follows_open_loop() {
        let (a, _) = harmonic();
        let g = ring4();
        let xk = DVector::from_vec(vec![0.3, -0.8]);
        let mut x = DVector::zeros(8);
        for k in 0..4 {
            x.rows_mut(2 * k, 2).copy_from(&xk);
        }
        let dx = static_state_rhs(&a, g.adjacency_at(0.0).unwrap(), &x, 2);
        for k in 0..4 {
            assert_relative_eq!(
                DVector::from(dx.rows(2 * k, 2).into_owned()),
                &a * &xk,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn cancelled_and_uncancelled_static_forms_agree() {
        let (a, _) = harmonic();
        let b = matrix_from_rows(&[vec![2.0, 0.3], vec![-0.4, 1.5]]).unwrap();
        let g = ring4();
        let x = seeded_vector(8, 9);
        let cancelled = static_state_rhs(&a, g.adjacency_at(0.0).unwrap(), &x, 2);
        let uncancelled =
            static_state_rhs_uncancelled(&a, &b, g.adjacency_at(0.0).unwrap(), &x, 2).unwrap();
        assert!((cancelled - uncancelled).amax() <= 1e-10);
    }

    #[test]
    fn uncancelled_form_rejects_singular_b() {
        let (a, _) = harmonic();
        let b = matrix_from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let g = ring4();
        let x = seeded_vector(8, 10);
        assert!(matches!(
            static_state_rhs_uncancelled(&a, &b, g.adjacency_at(0.0).unwrap(), &x, 2),
            Err(ControlError::BNotInvertible { .. })
        ));
    }

    #[test]
    fn dynamic_state_origin_is_an_equilibrium() {
        let (a, b) = harmonic();
        let k = matrix_from_rows(&[vec![0.0, -1.0]]).unwrap();
        let plant = LinearPlant::continuous(a, b, None).unwrap();
        let closed = ClosedLoop::new(plant, ring4(), CouplingLaw::DynamicState { k }).unwrap();
        let zero = NetworkState::zeros(closed.layout());
        let d = closed.rhs(0.0, &zero).unwrap();
        assert!(d.x.amax() < 1e-15);
        assert!(d.eta.unwrap().amax() < 1e-15);
    }

    #[test]
    fn dynamic_state_synchronized_with_zero_controller_state() {
        let (a, b) = harmonic();
        let k = matrix_from_rows(&[vec![0.0, -1.0]]).unwrap();
        let plant = LinearPlant::continuous(a.clone(), b, None).unwrap();
        let closed = ClosedLoop::new(plant, ring4(), CouplingLaw::DynamicState { k }).unwrap();
        let xk = DVector::from_vec(vec![1.0, 0.5]);
        let mut state = NetworkState::zeros(closed.layout());
        for k in 0..4 {
            state.x.rows_mut(2 * k, 2).copy_from(&xk);
        }
        let d = closed.rhs(0.0, &state).unwrap();
        // Coupling vanishes: eta stays zero and x follows the open loop.
        assert!(d.eta.unwrap().amax() < 1e-14);
        for k in 0..4 {
            assert_relative_eq!(
                DVector::from(d.x.rows(2 * k, 2).into_owned()),
                &a * &xk,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn dynamic_state_s_dynamics_decouple() {
        // s = x - eta must satisfy sdot = (I (x) A) s - (L (x) I) s exactly.
        let (a, b) = harmonic();
        let k = matrix_from_rows(&[vec![0.0, -1.0]]).unwrap();
        let plant = LinearPlant::continuous(a.clone(), b, None).unwrap();
        let g = ring4();
        let closed = ClosedLoop::new(plant, g, CouplingLaw::DynamicState { k }).unwrap();

        let x = seeded_vector(8, 11);
        let eta = seeded_vector(8, 12);
        let state = NetworkState { x: x.clone(), eta: Some(eta.clone()), xhat: None };
        let d = closed.rhs(0.0, &state).unwrap();

        let s = &x - &eta;
        let sdot = &d.x - &d.eta.unwrap();
        let a_tilde = DMatrix::<f64>::identity(4, 4).kronecker(&a);
        let l_hat = closed
            .graph()
            .laplacian(0.0)
            .unwrap()
            .kronecker(&DMatrix::<f64>::identity(2, 2));
        let expected = &a_tilde * &s - &l_hat * &s;
        assert!((sdot - expected).amax() <= 1e-12);
    }

    #[test]
    fn dynamic_state_rejects_non_hurwitz_gain() {
        let (a, b) = harmonic();
        let k = matrix_from_rows(&[vec![0.0, 1.0]]).unwrap();
        let plant = LinearPlant::continuous(a, b, None).unwrap();
        assert!(matches!(
            ClosedLoop::new(plant, ring4(), CouplingLaw::DynamicState { k }),
            Err(ControlError::ControllerGainNotStabilizing { .. })
        ));
    }

    #[test]
    fn observer_law_vector_field_at_consistent_point() {
        // With xhat = x and eta = x the coupling vanishes; the vector-field
        // formula gives xdot_k = (A + BK) x_k.
        let (a, b) = harmonic();
        let c = matrix_from_rows(&[vec![0.0, 1.0]]).unwrap();
        let k = matrix_from_rows(&[vec![0.0, -1.0]]).unwrap();
        let h = crate::matcore::detectability_gain(&a, &c).unwrap();
        let plant = LinearPlant::continuous(a.clone(), b.clone(), Some(c)).unwrap();
        let closed = ClosedLoop::new(
            plant,
            ring4(),
            CouplingLaw::DynamicOutputObserver { k: k.clone(), h },
        )
        .unwrap();

        let x = seeded_vector(8, 13);
        let state =
            NetworkState { x: x.clone(), eta: Some(x.clone()), xhat: Some(x.clone()) };
        let d = closed.rhs(0.0, &state).unwrap();
        let a_bk = &a + &b * &k;
        for agent in 0..4 {
            let expected = &a_bk * x.rows(2 * agent, 2);
            assert_relative_eq!(
                DVector::from(d.x.rows(2 * agent, 2).into_owned()),
                DVector::from(expected),
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn observer_error_dynamics_depend_on_error_only() {
        let (a, b) = harmonic();
        let c = matrix_from_rows(&[vec![0.0, 1.0]]).unwrap();
        let k = matrix_from_rows(&[vec![0.0, -1.0]]).unwrap();
        let h = crate::matcore::detectability_gain(&a, &c).unwrap();
        let hc = &h * &c;
        let plant = LinearPlant::continuous(a.clone(), b, Some(c)).unwrap();
        let closed =
            ClosedLoop::new(plant, ring4(), CouplingLaw::DynamicOutputObserver { k, h }).unwrap();

        let e = seeded_vector(8, 14);
        // Two wildly different (x, eta) backgrounds with the same error e.
        for seed in [20u64, 21] {
            let x = seeded_vector(8, seed);
            let eta = seeded_vector(8, seed + 40);
            let xhat = &x - &e;
            let state = NetworkState { x: x.clone(), eta: Some(eta), xhat: Some(xhat.clone()) };
            let d = closed.rhs(0.0, &state).unwrap();
            let edot = &d.x - &d.xhat.unwrap();
            let expected = DMatrix::<f64>::identity(4, 4).kronecker(&(&a + &hc)) * &e;
            assert!((edot - expected).amax() <= 1e-12);
        }
    }

    #[test]
    fn static_output_law_matches_manual_evaluation() {
        // Harmonic oscillators with y = x_2: u_k = sum a_kj (x_{2j} - x_{2k}).
        let (a, b) = harmonic();
        let c = matrix_from_rows(&[vec![0.0, 1.0]]).unwrap();
        let g = ring4();
        let x = seeded_vector(8, 15);
        let dx = static_output_rhs(&a, &b, &c, g.adjacency_at(0.0).unwrap(), &x, 2);
        for k in 0..4 {
            let j = (k + 3) % 4; // lone in-neighbor in the ring
            let u = x[2 * j + 1] - x[2 * k + 1];
            assert_relative_eq!(dx[2 * k], x[2 * k + 1], epsilon = 1e-14);
            assert_relative_eq!(dx[2 * k + 1], -x[2 * k] + u, epsilon = 1e-14);
        }
    }

    #[test]
    fn static_output_law_with_summed_output() {
        // Double integrators with y = x_1 + x_2.
        let a = matrix_from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let b = matrix_from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let c = matrix_from_rows(&[vec![1.0, 1.0]]).unwrap();
        let g = ring4();
        let x = seeded_vector(8, 16);
        let dx = static_output_rhs(&a, &b, &c, g.adjacency_at(0.0).unwrap(), &x, 2);
        for k in 0..4 {
            let j = (k + 3) % 4;
            let y_j = x[2 * j] + x[2 * j + 1];
            let y_k = x[2 * k] + x[2 * k + 1];
            assert_relative_eq!(dx[2 * k + 1], y_j - y_k, epsilon = 1e-14);
        }
    }

    #[test]
    fn static_output_requires_output_map_and_matching_dims() {
        let (a, b) = harmonic();
        let plant = LinearPlant::continuous(a.clone(), b.clone(), None).unwrap();
        assert!(matches!(
            ClosedLoop::new(plant, ring4(), CouplingLaw::StaticDiffusiveOutput),
            Err(ControlError::MissingOutput)
        ));

        let c2 = matrix_from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let plant = LinearPlant::continuous(a, b, Some(c2)).unwrap();
        assert!(matches!(
            ClosedLoop::new(plant, ring4(), CouplingLaw::StaticDiffusiveOutput),
            Err(ControlError::InputOutputMismatch { m: 1, p: 2 })
        ));
    }

    #[test]
    fn epsilon_bounds_are_enforced_per_segment() {
        let a = DMatrix::<f64>::identity(1, 1);
        let b = DMatrix::<f64>::identity(1, 1);
        let plant = LinearPlant::discrete(a, b, None).unwrap();
        let g = complete_graph(2);
        // In-degree is 1, so the open interval is (0, 1): the boundary fails.
        let law = CouplingLaw::DiscreteStaticInverseB { epsilons: vec![1.0, 0.5] };
        assert!(matches!(
            ClosedLoop::new(plant.clone(), g.clone(), law),
            Err(ControlError::EpsilonOutOfRange { agent: 0, .. })
        ));
        let law = CouplingLaw::DiscreteStaticInverseB { epsilons: vec![0.5, 0.5] };
        assert!(ClosedLoop::new(plant, g, law).is_ok());
    }
}
