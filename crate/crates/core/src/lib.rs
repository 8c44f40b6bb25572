//! Synchronization of networks of identical linear systems coupled over
//! time-varying directed communication graphs.
//!
//! The crate is organized around five subsystems:
//!
//! * [`matcore`] — dense linear-algebra kernel: Kronecker calculus, matrix
//!   exponential, eigenvalues and spectral classification, Lyapunov solving
//!   and stabilizing-gain synthesis.
//! * [`graphnet`] — piecewise-constant switching digraphs, Laplacians,
//!   balancedness and (uniform) connectivity certificates.
//! * [`plant`] — agent models: continuous, discrete and periodic linear
//!   systems, hypothesis reports and Floquet analysis.
//! * [`controllers`] — the coupling-law family (static state, dynamic state,
//!   observer-based output feedback, diffusive output, discrete and periodic
//!   variants) plus passivity and observability certificates.
//! * [`simkit`] — deterministic fixed-step simulation aligned with graph
//!   switching, and synchronization metrics.
//!
//! All numerics are generic over the scalar type through [`Real`]; the
//! crate-root aliases [`Matrix`] and [`Vector`] fix the common
//! double-precision instantiation.

pub mod controllers;
pub mod graphnet;
pub mod matcore;
pub mod plant;
mod scalar;
pub mod simkit;

pub use scalar::Real;

/// Dense double-precision matrix, the default instantiation.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense double-precision column vector.
pub type Vector = nalgebra::DVector<f64>;
