use crate::lattice::VertexFunction;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("functions live on different tori: {0}")]
    TorusMismatch(String),

    #[error(
        "{quantity} is not {period}-periodic: vertex {vertex} vs axis-{axis} shift \
         ({value} != {translated})"
    )]
    NotPeriodic {
        quantity: &'static str,
        period: usize,
        vertex: usize,
        axis: usize,
        value: f64,
        translated: f64,
    },

    #[error(
        "0 is not in a spectral gap at tolerance {gap_tol:e}: eigenvalues {offending:?} \
         lie inside (-{gap_tol:e}, {gap_tol:e})"
    )]
    GapViolation { gap_tol: f64, offending: Vec<f64> },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("{0}")]
    Domain(String),

    #[error(
        "no interior maximizer on the positive half-space (ray parameter collapsed to \
         {s:e}); the nonlinearity hypotheses deserve an audit"
    )]
    MaximizerCollapsed { s: f64 },

    #[error(
        "fiber maximization stopped after {iterations} iterations with restricted \
         gradient norm {grad_norm:e}"
    )]
    InnerNonConvergence {
        iterations: usize,
        grad_norm: f64,
        best: Box<VertexFunction>,
    },

    #[error(
        "fiber maximization starts disagree (distance {distance:e} > {tolerance:e}); \
         the maximizer does not look unique"
    )]
    UniquenessAudit { distance: f64, tolerance: f64 },

    #[error(
        "sphere minimization stopped after {iterations} iterations with gradient norm \
         {grad_norm:e}"
    )]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        psi_trace: Vec<f64>,
        best: Box<VertexFunction>,
    },

    #[error("flow step size underflowed at t = {t:e} with gradient norm {grad_norm:e}")]
    Stagnation {
        t: f64,
        grad_norm: f64,
        last: Box<VertexFunction>,
    },

    #[error("none of the {attempted} starts converged:\n{}", diagnostics.join("\n"))]
    NoConvergedStarts {
        attempted: usize,
        diagnostics: Vec<String>,
    },

    #[error("growth looks unbounded on the audit grid: {0}")]
    UnboundedGrowth(String),
}
