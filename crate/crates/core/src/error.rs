use thiserror::Error;

/// Errors surfaced by model construction, propagation and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("operator is not Hermitian (max deviation {max_dev:.3e} > {tol:.3e})")]
    NotHermitian { max_dev: f64, tol: f64 },

    #[error("eigensolver failed: LAPACK info = {0}")]
    EigenSolve(i32),

    #[error("time {t} outside protocol range [{t0}, {t1}]")]
    TimeOutOfRange { t: f64, t0: f64, t1: f64 },

    #[error("instantaneous basis ill-defined: eigenvalue gap {gap:.3e} below {tol:.3e} at t = {t}")]
    DegenerateBasis { t: f64, gap: f64, tol: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("insufficient decay: coherence never dropped below {floor} of its initial value")]
    InsufficientDecay { floor: f64 },

    #[error("statistics window too small: {got} states (need at least {need})")]
    WindowTooSmall { got: usize, need: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
