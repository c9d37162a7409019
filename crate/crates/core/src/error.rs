use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("initial data has mean {mean:e}, above tolerance {tol:e}; subtract the mean first")]
    NonZeroMean { mean: f64, tol: f64 },
    #[error("time must be positive, got {0}")]
    InvalidTime(f64),
    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("grid needs at least {min} points, got {got}")]
    GridTooSmall { min: usize, got: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("state {0:?} lies outside the system's state domain")]
    StateOutOfDomain(Vec<f64>),
    #[error("inner problem is not concave and multistart values disagree (spread {spread:e})")]
    NonConcaveInner { spread: f64 },
    #[error("dual field infeasible at (t-row {row}, x-index {col}): d_x W = {dxw}")]
    Infeasible { row: usize, col: usize, dxw: f64 },
    #[error("bad solver options: {0}")]
    BadOptions(String),
    #[error("solver diverged after {iterations} iterations")]
    Diverged { iterations: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
