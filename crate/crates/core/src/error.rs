use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounds: lo = {lo}, hi = {hi}")]
    InvalidBounds { lo: f64, hi: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("truncation at {k} retains no mass")]
    EmptyTruncation { k: f64 },

    #[error("conditioning event has no mass: {0}")]
    EmptyEvent(String),

    #[error("value {0} is not a support point of the grid")]
    NotOnGrid(f64),

    #[error("operation requires a discretized density, got a discrete grid")]
    DiscreteUnsupported,

    #[error("zero density at grid point {0}")]
    ZeroDensity(f64),

    #[error("kernel grids do not match: {0}")]
    GridMismatch(String),

    #[error("acceptance set is not a threshold set (g - h changes sign {changes} times)")]
    MultipleCrossings { changes: usize },

    #[error("constraint violated: p_A = {p_accept} < p_R = {p_reject}")]
    ConstraintViolated { p_accept: f64, p_reject: f64 },

    #[error("boundary curve is not monotone at theta1 = {0}")]
    NonMonotoneBoundary(f64),

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("horizon {horizon} exceeds the limit of {limit}")]
    HorizonLimit { horizon: usize, limit: usize },

    #[error("instance too large for exhaustive enumeration: {0}")]
    SizeLimitExceeded(String),

    #[error("no continuation fixed point at any first-period price")]
    NoFixedPoint,

    #[error("evaluation budget exceeded: {needed} > {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },

    #[error("unsupported for this model: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("assertion failed: {0}")]
    AssertionFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}
