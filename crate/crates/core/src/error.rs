use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Why a run was declared blown up.
#[derive(Debug, Clone, PartialEq)]
pub enum BlowupCause {
    /// `max(rho)` exceeded the configured ceiling.
    Ceiling { max_rho: f64, ceiling: f64 },
    /// A linear solve failed or produced non-finite samples.
    SolverFailure(String),
}

impl std::fmt::Display for BlowupCause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BlowupCause::Ceiling { max_rho, ceiling } => {
                write!(f, "max density {max_rho:e} exceeded ceiling {ceiling:e}")
            }
            BlowupCause::SolverFailure(msg) => write!(f, "solver failure: {msg}"),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("bad grid dimension: {0}")]
    BadDimension(String),
    #[error("spectral backend requires periodic boundary conditions")]
    IncompatibleBackend,
    #[error("operation requires the spectral backend")]
    WrongBackend,
    #[error("field contains non-finite samples")]
    NonFiniteField,
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("sample count {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("Lp exponent must lie in (1, inf], got {0}")]
    BadExponent(f64),
    #[error("Krylov iteration did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("Krylov iterate became non-finite")]
    NonFiniteIterate,
    #[error("initial data has negative samples (min {0:e})")]
    NegativeInitialData(f64),
    #[error("initial density has zero mass")]
    ZeroInitialMass,
    #[error("exponential reweighting overflows: chi * max(c) = {0}")]
    OverflowInExponential(f64),
    #[error("density undershoot below tolerance (min {min:e}, max {max:e})")]
    NegativeDensity { min: f64, max: f64 },
    #[error("blow-up detected at step {step} (t = {time}): {cause}")]
    BlowupDetected {
        step: usize,
        time: f64,
        cause: BlowupCause,
    },
    #[error("supercritical sweep point: mass {mass} >= threshold {threshold}")]
    Supercritical { mass: f64, threshold: f64 },
}
