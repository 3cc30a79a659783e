use thiserror::Error;

use crate::expr::{EvalError, ParseError};
use crate::jets::JetError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("metric is singular at this point (condition number {condition:e})")]
    SingularMetric { condition: f64 },
    #[error("metric is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("metric component ({i},{j}) differs from ({j},{i}) by {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("coordinate {coord} = {value} lies outside the chart domain [{lo}, {hi}]")]
    OutOfDomain {
        coord: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("degenerate plane: |X|²|Y|² - g(X,Y)² = {0:e}")]
    DegeneratePlane(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("alpha must be positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("closed-form curvature requires sigma = 0 (sigma or its derivatives are nonzero here)")]
    SigmaNonzero,
    #[error("X and Y must be g-orthonormal (defect {0:e})")]
    NotOrthonormal(f64),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = GeomError> = std::result::Result<T, E>;
