use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported dimension {0}; only 2 and 3 are supported")]
    UnsupportedDimension(usize),
    #[error("invalid resolution: {0}")]
    InvalidResolution(String),
    #[error("length mismatch: expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("body is not valid at node {node} (direction {direction:?}): {reason}")]
    Validation {
        node: usize,
        direction: [f64; 3],
        reason: String,
    },
    #[error("singular matrix (determinant {0:e})")]
    SingularMatrix(f64),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("body has no smooth support function: {0}")]
    NotSmooth(String),
    #[error("polar refinement did not converge in direction {direction:?}")]
    PolarNonConvergence { direction: [f64; 3] },
    #[error("degenerate hull: {0}")]
    DegenerateHull(String),
    #[error("time step {dt:e} exceeds the stability bound {bound:e}")]
    StabilityBound { dt: f64, bound: f64 },
    #[error("p = -n is excluded (p = {0})")]
    ExcludedExponent(f64),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
