use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("elements belong to different models")]
    ModelMismatch,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("element is not J-real (defect {defect:.3e})")]
    NotReal { defect: f64 },

    #[error("function is undefined at eigenvalue {eigenvalue}")]
    Undefined { eigenvalue: f64 },

    #[error("result lies outside the algebra span (residual {residual:.3e})")]
    OutsideAlgebra { residual: f64 },

    #[error("element is not positive (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("invalid group spec: {0}")]
    InvalidSpec(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model has no group structure")]
    NotGroupModel,

    #[error("model has no cocycle; the derivation is unavailable")]
    MissingCocycle,

    #[error("basis pairing is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
