//! Computational toolkit for discrete nonlinear Schrödinger equations
//! `-Lap u + V u = f(x, u)` on finite periodic truncations of the integer
//! lattice, in the strongly indefinite regime where `0` sits in a spectral
//! gap of `-Lap + V`.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`] — tori, vertex functions, discrete calculus;
//! * [`spectral`] — the operator `-Lap + V`, its eigensystem, the gap check,
//!   the positive/negative spectral splitting, and a Bloch-waves reference
//!   spectrum for periodic potentials;
//! * [`nonlinearity`] — periodic nonlinearities `f(x, u)` with their
//!   primitives and numerical audits of the standing growth hypotheses;
//! * [`variational`] — the energy functional, the generalized Nehari
//!   manifold, the fiber maximization `w -> m(w)` and the reduced functional
//!   on the unit sphere of the positive subspace;
//! * [`solver`] — minimization of the reduced functional, a descending flow,
//!   multistart search, orbit bookkeeping and solution verification.

pub mod error;
pub mod lattice;
pub mod nonlinearity;
pub mod solver;
pub mod spectral;
pub mod variational;

pub use error::{Error, Result};
pub use lattice::{LatticeTorus, VertexFunction};
pub use nonlinearity::{AuditBundle, AuditGrid, AuditOptions, AuditReport, Nonlinearity, PowerTerm};
pub use spectral::{
    bloch_spectrum, BlochSpectrum, Eigensystem, GapReport, SchrodingerOperator, SpectralSplit,
};
pub use solver::{
    minimize_sphere, multistart_search, orbit_distinct, pseudo_gradient_flow, verify_solution,
    FlowTrajectory, OrbitCheck, SearchOutcome, Solution, SolveOptions, SphereSolve,
    VerificationReport, VerifyOptions,
};
pub use variational::{GProfile, InnerOptions, NehariPoint, Problem};
