use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("component count mismatch: expected {expected}, got {got}")]
    ComponentMismatch { expected: usize, got: usize },
    #[error("field does not decay at the boundary: |f| = {value:e} exceeds {threshold:e}")]
    BoundaryDecay { value: f64, threshold: f64 },
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("Newton iteration failed after {iterations} steps (residual {residual:e})")]
    NewtonFailed { iterations: usize, residual: f64 },
    #[error("profile is not an equilibrium: residual {residual:e} above {tol:e}")]
    NotEquilibrium { residual: f64, tol: f64 },
    #[error("kernel degeneracy detected: {0}")]
    KernelDegenerate(String),
    #[error("singular linear solve: {0}")]
    SingularSolve(String),
    #[error("eigensolver failure: {0}")]
    Eigensolver(String),
    #[error("blow-up at t = {time}: sup-norm {sup:e}")]
    BlowUp { time: f64, sup: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
