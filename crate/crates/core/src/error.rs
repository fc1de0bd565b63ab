use thiserror::Error;

/// Errors raised by the inference pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("mean depth is zero")]
    ZeroMeanDepth,

    #[error("zero denominator in plug-in estimate")]
    ZeroDenominator,

    #[error("zero is not inside the convex hull of the pseudo-values")]
    HullViolation,

    #[error("solver did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },

    #[error("profile minimization failed: {0}")]
    ProfileFailure(String),

    #[error("no confidence bound found on the {side} side")]
    UnboundedInterval { side: &'static str },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("estimating equation is not affine in the parameter")]
    NotAffine,

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
