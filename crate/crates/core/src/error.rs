use thiserror::Error;

pub type Result<T, E = VimpError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VimpError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("variable index {index} out of range for {p} predictors")]
    IndexOutOfRange { index: usize, p: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("design matrix is rank deficient (condition estimate {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(&'static str),

    #[error("coefficient {index} is zero; absorption is undefined")]
    ZeroCoefficient { index: usize },

    #[error("denominator {0:e} too close to zero")]
    NearZeroDenominator(f64),

    #[error("invalid forest config: {0}")]
    InvalidConfig(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("training failed: {0}")]
    TrainingFailure(String),
}
