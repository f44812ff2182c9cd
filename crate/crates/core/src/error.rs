use thiserror::Error;

use crate::tomography::MleFit;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("operator is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("vector is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("not a physical density matrix: {0}")]
    NotPhysical(String),

    #[error("degenerate source configuration: {0}")]
    DegenerateSource(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("histogram grids do not match: {0}")]
    GridMismatch(String),

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("measurement design is rank deficient (rank {rank} < {needed})")]
    RankDeficient { rank: usize, needed: usize },

    #[error("optimizer did not converge after {evaluations} evaluations")]
    NotConverged { evaluations: usize, best: Box<MleFit> },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
