use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unbounded-section suspected: {touching} probe line(s) touch the window [-{window}, {window}]")]
    UnboundedSection { touching: usize, window: f64 },

    #[error("domain exceeded: t = {t} outside table range [{lo}, {hi}]")]
    DomainExceeded { t: f64, lo: f64, hi: f64 },

    #[error("below first doubling step: R = {r} < A + h = {min}")]
    BelowFirstStep { r: f64, min: f64 },

    #[error("empty interior: no lattice node lies inside the domain")]
    EmptyInterior,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("jacobian singular (Krylov breakdown at Newton iteration {iteration})")]
    JacobianSingular { iteration: usize },

    #[error("reflection leaves window: 2λ - x_N = {target} outside [{lo}, {hi}]")]
    ReflectionLeavesWindow { target: f64, lo: f64, hi: f64 },

    #[error("boundary ordering violated: u - v = {excess:e} at {position:?}")]
    BoundaryOrderingViolated { position: Vec<f64>, excess: f64 },

    #[error("hypothesis violated: S = {section} >= threshold {threshold}")]
    HypothesisViolated { section: f64, threshold: f64 },

    #[error("isometry not grid-aligned: {0}")]
    IsometryNotGridAligned(String),

    #[error("ball exits domain: B({center:?}, {radius}) is not contained in the window")]
    BallExitsDomain { center: Vec<f64>, radius: f64 },

    #[error("too few nodes in smallest ball: {found} < {required}")]
    TooFewNodes { found: usize, required: usize },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
