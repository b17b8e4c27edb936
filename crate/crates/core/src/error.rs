use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by fitting, resampling and the interval machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("insufficient sample: need at least {needed} values, got {got}")]
    InsufficientSample { needed: usize, got: usize },
    #[error("sample too short for variance correction (n = {n}, p = {p})")]
    VarianceCorrection { n: usize, p: usize },
    #[error("empty residual pool")]
    EmptyPool,
    #[error("degenerate design")]
    DegenerateDesign,
    #[error("series too short: need at least {needed} observations, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("regime starvation: every candidate threshold leaves a regime with fewer than {min_size} observations")]
    RegimeStarvation { min_size: usize },
    #[error("expected {expected} lagged values, got {got}")]
    LagCount { expected: usize, got: usize },
    #[error("simulation diverged at index {index}")]
    SimulationDiverged { index: usize },
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("series too short for splice search")]
    SpliceSearchTooShort,
    #[error("insufficient history before splice point: need {needed}, have {have}")]
    InsufficientHistory { needed: usize, have: usize },
    #[error("model form unstable under resampling: {rejections} rejections for {accepted} accepted replicates (rejection rate {rate:.3})")]
    ModelFormUnstable {
        rejections: usize,
        accepted: usize,
        rate: f64,
    },
    #[error("grid too narrow: {leaked:.2e} probability mass left the grid; try bounds [{suggested_lo:.3}, {suggested_hi:.3}]")]
    GridTooNarrow {
        leaked: f64,
        suggested_lo: f64,
        suggested_hi: f64,
    },
    #[error("level must lie strictly between 0 and 1, got {0}")]
    InvalidLevel(f64),
    #[error("method not applicable: {0}")]
    MethodMismatch(String),
}

/// Coarse failure class, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidSpec(_) | Error::InvalidLevel(_) | Error::MethodMismatch(_) => ErrorClass::Config,
            Error::SimulationDiverged { .. } | Error::ModelFormUnstable { .. } | Error::GridTooNarrow { .. } => {
                ErrorClass::Numerical
            }
            _ => ErrorClass::Data,
        }
    }
}
