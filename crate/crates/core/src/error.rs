//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("equilibrium solver did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("coincident ion positions at indices {0} and {1}")]
    CoincidentPositions(usize, usize),

    #[error("Hessian has non-positive eigenvalue {0:.3e}; not a valid equilibrium")]
    NonPositiveMode(f64),

    #[error("unsupported species: {0}")]
    UnsupportedSpecies(String),

    #[error("matrix is not diagonal (max off-diagonal magnitude {0:.3e})")]
    NotDiagonal(f64),

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("ion index {index} out of range for {n_qutrits} qutrits")]
    IonOutOfRange { index: usize, n_qutrits: usize },

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("structural error: {0}")]
    Structural(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
