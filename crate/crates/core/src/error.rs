use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("target weight at state {state} is not a positive finite number ({value})")]
    NonPositiveWeight { state: usize, value: f64 },

    #[error("grid is empty or malformed: {0}")]
    BadGrid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameters for {family}: {reason}")]
    InvalidParameter { family: String, reason: String },

    #[error("unknown test-function case '{0}'")]
    UnknownCase(String),

    #[error("test-function case '{case}' does not apply: {reason}")]
    RegimeMismatch { case: String, reason: String },

    #[error("quadrature with {0} points per axis is too coarse")]
    QuadratureTooCoarse(usize),

    #[error("test function has zero variance")]
    ZeroVariance,

    #[error("test function is not centered (mean {mean:e})")]
    NotCentered { mean: f64 },

    #[error("eigensolver did not converge (best estimate {estimate:e}, residual {residual:e})")]
    NonConvergence { estimate: f64, residual: f64 },

    #[error("chain is disconnected (second eigenvalue of the generator is {0:e})")]
    Disconnected(f64),

    #[error("dense solve refused: {states} states exceeds the cap of {cap}")]
    DenseCapExceeded { states: usize, cap: usize },

    #[error("time must be finite and non-negative (got {0})")]
    NegativeTime(f64),

    #[error(
        "mixing time not bracketed: distance {distance:e} still above threshold at t = {t_hi:e}"
    )]
    BracketFailure { t_hi: f64, distance: f64 },

    #[error("invalid path from {from} to {to}: {reason}")]
    InvalidPath {
        from: usize,
        to: usize,
        reason: String,
    },

    #[error("pair budget exceeded: {required} pairs required, cap {cap}; partial maximum {partial_max:e} is not a certificate")]
    PairBudgetExceeded {
        required: u64,
        cap: u64,
        partial_max: f64,
    },

    #[error("size cap exceeded: {0}")]
    CapExceeded(String),

    #[error("unsupported regime: {reason} (nearest supported: {nearest})")]
    Unsupported { reason: String, nearest: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("serialization error: {0}")]
    Serde(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(family: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            family: family.to_string(),
            reason: reason.into(),
        }
    }
}
