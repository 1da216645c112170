//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by oracles, solvers and certificate routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// `psi` is finite but not subdifferentiable at the queried point
    /// (boundary blow-up); callers fall back to horizontal normals.
    #[error("empty subdifferential at {point:?}")]
    EmptySubdifferential { point: Vec<f64> },

    /// Atoms of an inner body do not affinely span the space.
    #[error("atoms do not affinely span R^{dim}")]
    DegenerateSpan { dim: usize },

    /// No exponential decay envelope could be established; the integral
    /// cannot be certified finite.
    #[error("integral diverges (no decay envelope)")]
    IntegralDiverges,

    /// Bounded search for `(theta, nu)` with `f <= theta * exp(-nu |x|)`
    /// failed; the input is not proper.
    #[error("no exponential decay envelope found")]
    EnvelopeNotFound,

    /// A matrix that must be invertible is singular.
    #[error("singular matrix{}", critical_t.map(|t| format!(" (critical t = {t})")).unwrap_or_default())]
    SingularMatrix { critical_t: Option<f64> },

    /// A lifting normal could not be normalized: some extreme subgradient
    /// `p` has `1 + <p, u> <= 0`.
    #[error("star-like condition violated at u = {point:?}: 1 + <p, u> = {value}")]
    StarLikeViolation { point: Vec<f64>, value: f64 },

    /// The flat-zero sequence test did not converge within budget.
    #[error("flat-zero test inconclusive at {point:?}")]
    Inconclusive { point: Vec<f64> },

    /// The epigraph/lifting normal map needs `f(u) > 0`.
    #[error("zero function value at {point:?}")]
    ZeroValue { point: Vec<f64> },

    /// Inner convex subproblem failed to converge.
    #[error("numerical failure in {context}: {detail}")]
    NumericalFailure {
        context: &'static str,
        detail: String,
    },

    /// No feasible position exists (or none was found within budget).
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Weight recovery was asked to act on an empty pair list.
    #[error("no contact pairs supplied")]
    NoPairs,

    /// A power transform needs the generating subgradient of each
    /// non-horizontal pair.
    #[error("contact pair at {point:?} carries no generating subgradient")]
    MissingSubgradient { point: Vec<f64> },

    /// The classical reduction only applies to indicator/indicator input.
    #[error("certificate does not come from an indicator/indicator instance")]
    NotIndicatorInstance,

    /// Line search along a separating direction found neither an improved
    /// feasible position nor a new contact point.
    #[error("line search failed: {0}")]
    LineSearchFailed(String),

    /// Scenario or descriptor input is invalid.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn singular() -> Self {
        Error::SingularMatrix { critical_t: None }
    }
}
