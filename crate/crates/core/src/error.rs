use thiserror::Error;

use crate::amp::BpState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The SCAD single-body objective is not concave in its middle region.
    #[error("degenerate SCAD parameters: qhat*(a-1) = {curvature} <= eta = {eta}")]
    DegenerateScad { curvature: f64, eta: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// BP ran out of iterations; the last iterate is kept for diagnostics.
    #[error("belief propagation did not converge after {} iterations", .state.iter)]
    BpNonConvergence { state: Box<BpState> },

    #[error("target delta {target} is not reachable on the finite branch (reachable range [{min}, {max}])")]
    NotBracketed { target: f64, min: f64, max: f64 },

    #[error("delta = {0} is outside the physical region (0, 1]")]
    UnphysicalRegion(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("group size T = {t} requires 3T < N = {n}")]
    InvalidT { t: usize, n: usize },

    #[error("N = {n} exceeds the exact-search cap of {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("prediction error has no interior minimum in [{lo}, {hi}]")]
    NoMinimumInRange { lo: f64, hi: f64 },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
