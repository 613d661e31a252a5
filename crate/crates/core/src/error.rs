use alloc::string::String;
use alloc::vec::Vec;

/// Failure of a single forward/adjoint model evaluation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("model evaluation failed at level {level} for parameters {lambda:?}: {kind}")]
pub struct ModelError {
    pub lambda: Vec<f64>,
    pub level: usize,
    pub kind: ModelErrorKind,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelErrorKind {
    #[error("singular or non-positive pivot in linear solve")]
    SingularSystem,
    #[error("Newton iteration did not converge (residual {residual:e} after {iterations} iterations)")]
    NewtonDiverged { residual: f64, iterations: usize },
    #[error("level {level} outside 1..={max}")]
    LevelOutOfRange { level: usize, max: usize },
    #[error("non-finite value produced")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> crate::Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
