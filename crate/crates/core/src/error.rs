use thiserror::Error;

/// Failure modes shared by every solver and check in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("singular value: u = {value:e} at node {node} (x = {x})")]
    Singularity { node: usize, x: f64, value: f64 },

    #[error("{what} did not converge after {iterations} iterations (last change {last:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        last: f64,
    },

    #[error("Newton iteration stagnated: damping underflow with residual {residual:e}")]
    Stagnation { residual: f64 },

    #[error("contraction violated: iterate left the ball |v - v0| < v0/2 (deviation {deviation})")]
    ContractionViolation { deviation: f64 },

    #[error("monotonicity violated: {0}")]
    Monotonicity(String),

    #[error("iterate lost positivity at node {node} (value {value:e})")]
    Positivity { node: usize, value: f64 },

    #[error("Hopf bound failed: {0}")]
    HopfFailure(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("bisection bracket [{lo}, {hi}] does not enclose a root")]
    Bracket { lo: f64, hi: f64 },

    #[error("Pucci sandwich violated by {gap:e} at r = {r}")]
    SandwichViolation { gap: f64, r: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("insufficient data: {found} nodes in window, need at least {needed}")]
    InsufficientData { found: usize, needed: usize },

    #[error("regime not applicable: {0}")]
    Regime(String),

    #[error("scheme error: {0}")]
    Scheme(String),
}

impl Error {
    /// True for failures that mean an iterative method gave up.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::Stagnation { .. }
                | Error::ContractionViolation { .. }
                | Error::Monotonicity(_)
                | Error::Positivity { .. }
                | Error::Scheme(_)
                | Error::SandwichViolation { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
