use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid tree size: {0}")]
    Sizing(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("matrix is not tridiagonal: entry ({row}, {col}) = {value}")]
    NotTridiagonal { row: usize, col: usize, value: f64 },

    #[error("matrix is not symmetric: |M({row},{col}) - M({col},{row})| = {defect:e}")]
    NotSymmetric { row: usize, col: usize, defect: f64 },

    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal mass {off:e})")]
    NotConverged { sweeps: usize, off: f64 },

    #[error("terminal relation violated for lambda = {lambda}: residual {residual:e}")]
    TerminalResidual { lambda: f64, residual: f64 },

    #[error("invalid eigenvector construction: {0}")]
    InvalidConstruction(String),

    #[error("no real root: lambda = {lambda} has lambda^2 < 4d/(d+1)^2 (k = {k})")]
    NoRealRoot { k: usize, lambda: f64 },

    #[error("eigenvalue count mismatch: analytic {analytic}, oracle {oracle}")]
    CountMismatch { analytic: usize, oracle: usize },

    #[error("F(sigma) = {0:e} vanishes; contraction ratio undefined")]
    UndefinedRatio(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
