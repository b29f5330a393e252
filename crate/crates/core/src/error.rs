use thiserror::Error;

/// Errors raised by the numerical and I/O layers of the crate.
#[derive(Debug, Error)]
pub enum LmsError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("eigensolver did not converge within the iteration cap")]
    NoConvergence,

    #[error("matrix is not positive semi-definite within jitter cap {cap:e}")]
    NotPositiveSemiDefinite { cap: f64 },

    #[error("rank deficient: numerical rank {rank} is below the requested {requested}")]
    RankDeficient { rank: usize, requested: usize },

    #[error("kernel error: {0}")]
    Kernel(String),

    #[error("point cloud of {n} points exceeds the configured cap of {cap}")]
    CapExceeded { n: usize, cap: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LmsError {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            LmsError::NoConvergence
                | LmsError::NotPositiveSemiDefinite { .. }
                | LmsError::RankDeficient { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, LmsError>;
