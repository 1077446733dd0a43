use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("row {row} of the feature matrix has zero variance")]
    ZeroVarianceRow { row: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} needs {size} unknowns, above the configured cap of {cap}")]
    CapExceeded { what: &'static str, size: usize, cap: usize },

    #[error("missingness assumption violated: patch (row component {row_component}, column component {col_component}) has no observed entry")]
    AssumptionViolated { row_component: usize, col_component: usize },

    #[error("system matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    MaxItersExceeded { iterations: usize, residual: f64 },

    #[error("gradient undefined: residual sum of squares is zero")]
    GradientUndefined,

    #[error("could not find a feasible {folds}-fold split after {attempts} attempts")]
    FoldInfeasible { folds: usize, attempts: usize },

    #[error("could not draw a mask satisfying the missingness assumption after {attempts} attempts")]
    InfeasibleRealization { attempts: usize },

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("serialization error: {0}")]
    Serde(String),

    #[error("linear algebra failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl AsRef<std::path::Path>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse { path: path.as_ref().display().to_string(), line, message: message.into() }
    }

    /// True for failures of the linear solve itself (used to map CLI exit codes).
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite(_)
                | Error::MaxItersExceeded { .. }
                | Error::GradientUndefined
                | Error::Numerical(_)
        )
    }
}
