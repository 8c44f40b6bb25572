//! Agent models: continuous, discrete and periodic linear systems.

mod floquet;

pub use floquet::{monodromy, rotating_frame_coefficients, FloquetData};

use crate::matcore::{
    condition_number, pbh_detectable, pbh_stabilizable, classify_spectrum, require_finite,
    DenseMatrix, MatError, PbhReport, Spectrum, TimeDomain, SINGULAR_CONDITION,
};
use crate::Real;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("operation requires a periodic plant")]
    NotPeriodic,
    #[error("period must be positive, got {period}")]
    BadPeriod { period: f64 },
    #[error("periodic coefficients need at least two samples, got {got}")]
    TooFewSamples { got: usize },
    #[error("step {step} does not divide the period {period}")]
    StepDoesNotDividePeriod { step: f64, period: f64 },
    #[error("integrator step {step} is coarser than the sample spacing {spacing}")]
    StepTooCoarse { step: f64, spacing: f64 },
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// Time structure of the agent model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantKind {
    Continuous,
    Discrete,
    Periodic,
}

/// Periodic system matrix supplied as samples on a uniform grid over one
/// period, with linear interpolation in between (wrapping at the period).
#[derive(Debug, Clone)]
pub struct PeriodicCoefficients<T: Real> {
    period: T,
    samples: Vec<DenseMatrix<T>>,
}

impl<T: Real> PeriodicCoefficients<T> {
    pub fn new(period: T, samples: Vec<DenseMatrix<T>>) -> Result<Self, PlantError> {
        if period <= T::zero() {
            return Err(PlantError::BadPeriod { period: period.to_f64().unwrap_or(f64::NAN) });
        }
        if samples.len() < 2 {
            return Err(PlantError::TooFewSamples { got: samples.len() });
        }
        let n = samples[0].nrows();
        for s in &samples {
            if s.nrows() != n || s.ncols() != n {
                return Err(PlantError::Dimension(format!(
                    "sample is {}x{}, expected {n}x{n}",
                    s.nrows(),
                    s.ncols()
                )));
            }
            require_finite(s).map_err(|_| PlantError::NonFinite)?;
        }
        Ok(Self { period, samples })
    }

    pub fn period(&self) -> T {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.samples[0].nrows()
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[DenseMatrix<T>] {
        &self.samples
    }

    /// Grid spacing between consecutive samples.
    pub fn spacing(&self) -> T {
        self.period / T::from_usize(self.samples.len()).unwrap()
    }

    /// `A(t)` by periodic linear interpolation of the samples.
    pub fn at(&self, t: T) -> DenseMatrix<T> {
        let m = self.samples.len();
        let wraps = (t / self.period).floor();
        let local = t - wraps * self.period;
        let u = local / self.spacing();
        let i = u.floor().to_usize().unwrap_or(0).min(m - 1);
        let frac = u - T::from_usize(i).unwrap();
        let next = (i + 1) % m;
        &self.samples[i] * (T::one() - frac) + &self.samples[next] * frac
    }
}

/// The dynamics matrix of an agent, by kind.
#[derive(Debug, Clone)]
pub enum Dynamics<T: Real> {
    Continuous(DenseMatrix<T>),
    Discrete(DenseMatrix<T>),
    Periodic(PeriodicCoefficients<T>),
}

/// Identical agent model `(A, B, C)`; `C` absent means the full state is
/// measured.
#[derive(Debug, Clone)]
pub struct LinearPlant<T: Real> {
    dynamics: Dynamics<T>,
    b: DenseMatrix<T>,
    c: Option<DenseMatrix<T>>,
}

impl<T: Real> LinearPlant<T> {
    fn validated(
        dynamics: Dynamics<T>,
        b: DenseMatrix<T>,
        c: Option<DenseMatrix<T>>,
    ) -> Result<Self, PlantError> {
        let n = match &dynamics {
            Dynamics::Continuous(a) | Dynamics::Discrete(a) => {
                if a.nrows() != a.ncols() {
                    return Err(PlantError::Dimension(format!(
                        "A is {}x{}",
                        a.nrows(),
                        a.ncols()
                    )));
                }
                require_finite(a).map_err(|_| PlantError::NonFinite)?;
                a.nrows()
            }
            Dynamics::Periodic(p) => p.dim(),
        };
        if b.nrows() != n {
            return Err(PlantError::Dimension(format!(
                "B has {} rows, state dimension is {n}",
                b.nrows()
            )));
        }
        require_finite(&b).map_err(|_| PlantError::NonFinite)?;
        if let Some(c) = &c {
            if c.ncols() != n {
                return Err(PlantError::Dimension(format!(
                    "C has {} columns, state dimension is {n}",
                    c.ncols()
                )));
            }
            require_finite(c).map_err(|_| PlantError::NonFinite)?;
        }
        Ok(Self { dynamics, b, c })
    }

    pub fn continuous(
        a: DenseMatrix<T>,
        b: DenseMatrix<T>,
        c: Option<DenseMatrix<T>>,
    ) -> Result<Self, PlantError> {
        Self::validated(Dynamics::Continuous(a), b, c)
    }

    pub fn discrete(
        a: DenseMatrix<T>,
        b: DenseMatrix<T>,
        c: Option<DenseMatrix<T>>,
    ) -> Result<Self, PlantError> {
        Self::validated(Dynamics::Discrete(a), b, c)
    }

    pub fn periodic(
        coefficients: PeriodicCoefficients<T>,
        b: DenseMatrix<T>,
        c: Option<DenseMatrix<T>>,
    ) -> Result<Self, PlantError> {
        Self::validated(Dynamics::Periodic(coefficients), b, c)
    }

    pub fn kind(&self) -> PlantKind {
        match self.dynamics {
            Dynamics::Continuous(_) => PlantKind::Continuous,
            Dynamics::Discrete(_) => PlantKind::Discrete,
            Dynamics::Periodic(_) => PlantKind::Periodic,
        }
    }

    pub fn dynamics(&self) -> &Dynamics<T> {
        &self.dynamics
    }

    /// System matrix for LTI plants.
    pub fn a(&self) -> Option<&DenseMatrix<T>> {
        match &self.dynamics {
            Dynamics::Continuous(a) | Dynamics::Discrete(a) => Some(a),
            Dynamics::Periodic(_) => None,
        }
    }

    /// System matrix at time `t` (constant for LTI plants).
    pub fn a_at(&self, t: T) -> DenseMatrix<T> {
        match &self.dynamics {
            Dynamics::Continuous(a) | Dynamics::Discrete(a) => a.clone(),
            Dynamics::Periodic(p) => p.at(t),
        }
    }

    pub fn periodic_coefficients(&self) -> Option<&PeriodicCoefficients<T>> {
        match &self.dynamics {
            Dynamics::Periodic(p) => Some(p),
            _ => None,
        }
    }

    pub fn b(&self) -> &DenseMatrix<T> {
        &self.b
    }

    pub fn c(&self) -> Option<&DenseMatrix<T>> {
        self.c.as_ref()
    }

    pub fn state_dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> Option<usize> {
        self.c.as_ref().map(DenseMatrix::nrows)
    }

    /// Checks the standing hypotheses of the synchronization results:
    /// spectral class of `A`, PBH stabilizability of `(A, B)`, PBH
    /// detectability of `(A, C)` when an output map is present, and
    /// invertibility of `B` for the state-coupling laws.
    ///
    /// Periodic plants report only the `B` verdicts here; their spectral
    /// hypothesis lives on the Floquet exponents, see [`monodromy`].
    pub fn check_hypotheses(&self, tol: T) -> Result<HypothesisReport<T>, PlantError> {
        let domain = match self.kind() {
            PlantKind::Continuous | PlantKind::Periodic => TimeDomain::Continuous,
            PlantKind::Discrete => TimeDomain::Discrete,
        };
        let (spectrum, stabilizable, detectable) = match self.a() {
            Some(a) => {
                let spectrum = Some(classify_spectrum(a, domain, tol)?);
                let stabilizable = Some(pbh_stabilizable(a, &self.b, domain, tol)?);
                let detectable = match &self.c {
                    Some(c) => Some(pbh_detectable(a, c, domain, tol)?),
                    None => None,
                };
                (spectrum, stabilizable, detectable)
            }
            None => (None, None, None),
        };
        Ok(HypothesisReport { spectrum, stabilizable, detectable, b_invertibility: self.b_invertibility() })
    }

    /// Squareness and conditioning verdict for `B`.
    pub fn b_invertibility(&self) -> BInvertibility<T> {
        let square = self.b.nrows() == self.b.ncols();
        if !square || self.b.nrows() == 0 {
            return BInvertibility { square, condition: None, invertible: false };
        }
        let condition = condition_number(&self.b);
        BInvertibility {
            square,
            condition: Some(condition),
            invertible: condition <= T::scalar(SINGULAR_CONDITION),
        }
    }
}

/// Conditioning verdict for the input matrix.
#[derive(Debug, Clone)]
pub struct BInvertibility<T: Real> {
    pub square: bool,
    pub condition: Option<T>,
    pub invertible: bool,
}

/// Verdicts on the hypotheses the synchronization theorems rest on.
#[derive(Debug, Clone)]
pub struct HypothesisReport<T: Real> {
    pub spectrum: Option<Spectrum<T>>,
    pub stabilizable: Option<PbhReport<T>>,
    pub detectable: Option<PbhReport<T>>,
    pub b_invertibility: BInvertibility<T>,
}

impl<T: Real> HypothesisReport<T> {
    /// No exponentially unstable open-loop mode (LTI plants only).
    pub fn no_unstable_mode(&self) -> Option<bool> {
        self.spectrum.as_ref().map(|s| s.classification.no_unstable_mode())
    }

    pub fn stabilizable_ok(&self) -> Option<bool> {
        self.stabilizable.as_ref().map(|r| r.ok)
    }

    pub fn detectable_ok(&self) -> Option<bool> {
        self.detectable.as_ref().map(|r| r.ok)
    }
}
