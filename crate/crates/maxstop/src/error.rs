//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the solvers and samplers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A point fell outside the state interval or the support of a measure.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent arguments (e.g. `a >= b` for an interval).
    #[error("argument error: {0}")]
    Argument(String),

    /// A quadrature or tail integral diverged (infinite or NaN value).
    #[error("divergent integral: {0}")]
    Divergence(String),

    /// Quadrature failed to reach the requested tolerance.
    #[error("quadrature failure: {0}")]
    Quadrature(String),

    /// The boundary ODE right-hand side was evaluated on or above the diagonal.
    #[error("singularity: {0}")]
    Singularity(String),

    /// The cost vanishes at the evaluation point; the ODE slope is infinite
    /// there and the solver must step across the zero-cost interval instead.
    #[error("zero cost at g = {at}: infinite slope")]
    ZeroCost { at: f64 },

    /// No maximal solution below the diagonal exists: the payoff is infinite.
    #[error("INFINITE_PAYOFF: {0}")]
    InfinitePayoff(String),

    /// The exit-interval optimization has no interior maximizer.
    #[error("NO_INTERIOR_MAX: {0}")]
    NoInteriorMax(String),

    /// The requested root does not exist in the admissible bracket.
    #[error("no root: {0}")]
    NoRoot(String),

    /// Construction not covered by the implemented theory.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Target measure inconsistent with the requested construction.
    #[error("inconsistent measure: {0}")]
    InconsistentMeasure(String),

    /// Statistics cannot be trusted (e.g. excessive censoring).
    #[error("reliability error: {0}")]
    Reliability(String),

    /// A simulated path left the region where the boundary is defined.
    #[error("simulation error: {0}")]
    Simulation(String),

    /// ODE integration failed (step size underflow or exhausted budget).
    #[error("ode failure: {0}")]
    Ode(String),

    /// Malformed expression or table in a function specification.
    #[error("invalid function spec: {0}")]
    FunctionSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
