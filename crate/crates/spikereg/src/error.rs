use thiserror::Error;

/// Errors produced by spec validation, closed-form evaluators, and the
/// numerical layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// The closed forms have poles at c = 1; refuse to evaluate inside the
    /// guard band rather than extrapolate.
    #[error("aspect ratio c = {c} lies inside the guard band |c - 1| < {delta}")]
    GuardBand { c: f64, delta: f64 },

    #[error("finite-dimension evaluation requested but d is not set")]
    MissingDimension,

    #[error("spec does not satisfy the evaluator's premise: {0}")]
    SpecMismatch(String),

    #[error("unsupported setting: {0}")]
    UnsupportedSetting(String),

    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix decomposition failed: {0}")]
    DecompositionFailure(String),

    #[error("xi = {xi} is too close to zero (scale {scale}); rank-one update is degenerate")]
    DegenerateXi { xi: f64, scale: f64 },

    #[error("matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("missing columns: {0}")]
    MissingColumns(String),

    #[error("invalid sweep plan: {0}")]
    InvalidPlan(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code for the CLI: 1 for validation problems, 2 for numerical
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DecompositionFailure(_)
            | Error::DegenerateXi { .. }
            | Error::RankDeficient(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
