use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("horizon must be at least 1")]
    EmptyHorizon,

    #[error("nonpositive budget rate at j={j} ({value})")]
    NonPositiveBudgetRate { j: usize, value: f64 },

    #[error("negative reward at t={t}, j={j} ({value})")]
    NegativeReward { t: usize, j: usize, value: f64 },

    #[error("negative cost at t={t}, row={row}, col={col} ({value})")]
    NegativeCost {
        t: usize,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("invalid regularizer: {0}")]
    InvalidRegularizer(String),

    #[error("consumption {value} exceeds budget rate {limit} at j={j}")]
    ConsumptionExceedsBudget { j: usize, value: f64, limit: f64 },

    #[error("dual vector is outside the dual feasible set")]
    OutsideDualSet,

    #[error("prefix projection requires weights w_j = rho_j^2 (mismatch at j={j})")]
    WeightMismatch { j: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid step-size {0}")]
    InvalidStepSize(f64),

    #[error("non-finite dual iterate at step {step}")]
    NonFiniteIterate { step: usize },

    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("internal oracle failure: {0}")]
    Oracle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
