use thiserror::Error;

/// Errors raised by grid construction, solvers and the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeatError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid interval set: {0}")]
    InvalidIntervals(String),
    #[error("time set has zero measure")]
    EmptyTimeSet,
    #[error("observation mask contains no interior node")]
    EmptyMask,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("singular step matrix at time step {step}")]
    SingularStep { step: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("potential must be time independent for this operation")]
    TimeDependentPotential,
    #[error("zero data: {0}")]
    ZeroData(String),
    #[error("cutoff nesting violated: {0}")]
    Nesting(String),
    #[error("carleman search failed: inequality does not hold at tau_hi = {tau_hi}")]
    TauNotFound { tau_hi: f64 },
    #[error("Gram matrix numerically singular; max ratio is at least {lower_bound}")]
    SingularGram { lower_bound: f64 },
    #[error("degenerate least-squares design: {0}")]
    DegenerateFit(String),
}

pub type Result<T, E = HeatError> = std::result::Result<T, E>;
