use thiserror::Error;

/// Errors raised by the library. Site numbers are reported as user-facing
/// labels: 1-based for transition matrices, signed lattice positions for
/// windows on the integers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: expected (sites={expected_sites}, dim={expected_dim}), got (sites={found_sites}, dim={found_dim})")]
    ShapeMismatch {
        expected_sites: usize,
        expected_dim: usize,
        found_sites: usize,
        found_dim: usize,
    },

    #[error("column of site {site} is not normalized (residual {residual:.3e})")]
    ColumnNotNormalized { site: i64, residual: f64 },

    #[error("site {site} is out of range")]
    SiteOutOfRange { site: i64 },

    #[error("matrix is not column-stochastic: {reason}")]
    NotStochastic { reason: String },

    #[error("invalid vector state: {reason}")]
    InvalidState { reason: String },

    #[error("Kraus operators are not trace preserving (residual {residual:.3e})")]
    NotTracePreserving { residual: f64 },

    #[error("family member {index} is not unital")]
    NotUnital { index: usize },

    #[error("numerical failure: {reason}")]
    NumericalFailure { reason: String },

    #[error("iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("iteration diverged at site {site}: operator norm exceeded cap {cap:.3e}")]
    Divergent { site: i64, cap: f64 },

    #[error("all branch probabilities vanished at site {site}")]
    DeadEnd { site: i64 },

    #[error("probability mass {mass:.3e} reached the window edge at site {site}")]
    WindowOverflow { site: i64, mass: f64 },

    #[error("matrix is not normal (residual {residual:.3e})")]
    NotNormal { residual: f64 },

    #[error("matrices do not commute (residual {residual:.3e})")]
    NotCommuting { residual: f64 },

    #[error("transition matrices are not normalized (residual {residual:.3e})")]
    NotNormalized { residual: f64 },

    #[error("first-visit formula requires the walk to start at the origin, got {start}")]
    StartNotOrigin { start: i64 },

    #[error("series neither diverged nor converged within {terms} terms")]
    SeriesUndetermined { terms: usize },

    #[error("site {site} violates the supersolution inequality by {deficit:.3e}")]
    NotASupersolution { site: i64, deficit: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
