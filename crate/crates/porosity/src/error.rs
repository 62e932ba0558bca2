use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite entry in vector")]
    NonFinite,

    #[error("vector is not unit norm: |v| = {norm}")]
    NotUnitNorm { norm: f64 },

    #[error("invalid norm exponent p = {p}; require p >= 1 or infinity")]
    InvalidExponent { p: f64 },

    #[error("invalid convex body: {0}")]
    InvalidBody(String),

    #[error("point lies outside the body (residual {residual:.3e} > tol {tol:.3e})")]
    OutsideBody { residual: f64, tol: f64 },

    #[error("sampling produced no points: {0}")]
    EmptySample(String),

    #[error("invalid map expression: {0}")]
    InvalidMap(String),

    #[error("interval condition violated for (a, b) = ({a}, {b}): {reason}")]
    IntervalCondition { a: f64, b: f64, reason: String },

    #[error("no direction found: no sampled pair in U with quotient > {threshold}")]
    NoDirectionFound { threshold: f64 },

    #[error("no admissible radius found (stretch quotient fails to exceed {threshold} near x0)")]
    NoRadiusFound { threshold: f64 },

    #[error("epsilon {eps} must lie in (0, eps0) with eps0 = {eps0}")]
    EpsilonOutOfRange { eps: f64, eps0: f64 },

    #[error("degenerate range: require 0 < lo < hi < 1, got ({lo}, {hi})")]
    DegenerateRange { lo: f64, hi: f64 },

    #[error("scenario failed at stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
