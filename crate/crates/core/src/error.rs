use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature did not converge: last iterate {last:.17e}, previous {previous:.17e}")]
    Convergence { last: f64, previous: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("lattice point {point:?} lies outside the tabulated radius {radius}")]
    TabulationRange { point: [i64; 3], radius: f64 },

    #[error("invariant `{check}` failed: {detail}")]
    Invariant { check: String, detail: String },

    #[error("matrix is singular or near-singular (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("Hilbert-space dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: u128, cap: u128 },

    #[error("eigensolver did not converge after {iterations} matrix-vector products (residual {residual:.3e})")]
    EigenNoConvergence { iterations: usize, residual: f64 },

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("parameter point is outside the {expected} regime: {detail}")]
    Regime { expected: &'static str, detail: String },

    #[error("smallness assumption violated by bracket term `{term}` = {value:.6e}")]
    AssumptionViolation { term: String, value: f64 },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("Metropolis walk failed to mix (acceptance rate {acceptance:.4})")]
    MixingFailure { acceptance: f64 },

    #[error("constants registry: {0}")]
    Registry(String),
}

impl Error {
    pub fn invariant(check: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Invariant {
            check: check.into(),
            detail: detail.into(),
        }
    }

    /// True for errors that signal a failed mathematical check rather than bad input.
    pub fn is_invariant_failure(&self) -> bool {
        matches!(
            self,
            Error::Invariant { .. } | Error::AssumptionViolation { .. } | Error::Domain(_)
        )
    }
}
