use num_complex::Complex64;
use thiserror::Error;

/// Errors produced by the numerical kernels.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("modulus out of range: k = {0} (need 0 <= k < 1)")]
    ModulusRange(f64),

    #[error(
        "pole encountered at w = {w} (|denominator| = {denom:.3e} below threshold {threshold:.1e})"
    )]
    Pole {
        w: Complex64,
        denom: f64,
        threshold: f64,
    },

    #[error("angles ({0}, {1}, {2}) do not define a spherical triangle: {3}")]
    InvalidTriangle(f64, f64, f64, String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("gauge parameter xi must be nonzero")]
    ZeroGauge,

    #[error("sin(phi) = {0} outside (0, 1]")]
    InclinationRange(f64),

    #[error("root finding failed: {0}")]
    NoConvergence(String),

    #[error(
        "branch selection ambiguous: {candidates} candidate(s) matched theta1 within tolerance"
    )]
    AmbiguousBranch { candidates: usize },

    #[error("resampling budget of {0} exhausted")]
    Exhausted(usize),

    #[error("duplicate space label {0} in embedding")]
    DuplicateLabel(usize),

    #[error("cross-route disagreement in {what}: residual {residual:.3e}")]
    CrossRoute { what: &'static str, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
