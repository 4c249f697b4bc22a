use thiserror::Error;

/// Errors produced by the estimation and application layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is asymmetric beyond tolerance (relative asymmetry {0:.3e})")]
    Asymmetric(f64),

    #[error("model covariance SS^T + Sigma is singular or indefinite")]
    SingularModel,

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("sample covariance diagonal must be strictly positive")]
    NonPositiveDiagonal,

    #[error("noise variances must be strictly positive")]
    NonPositiveSigma,

    #[error("estimated factor basis is rank deficient ({active} of {required} factors active)")]
    RankDeficientBasis { active: usize, required: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
