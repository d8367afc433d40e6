use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("Bloch vector outside the Bloch body (min eigenvalue {min_eigenvalue:e})")]
    BlochOutOfBody { min_eigenvalue: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("argument {value} outside domain {domain}")]
    DomainError { value: f64, domain: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("adaptive step {step:e} fell below the minimum {min_step:e} at t = {t}")]
    StepSizeUnderflow { t: f64, step: f64, min_step: f64 },

    #[error("trajectory left the Bloch body at t = {t} (excess {excess:e})")]
    BlochEscape { t: f64, excess: f64 },

    #[error("transient not converged after t = {elapsed}; extend the integration time")]
    TransientNotConverged { elapsed: f64 },

    #[error("time average not converged (last window difference {achieved:e})")]
    AverageNotConverged { achieved: f64 },

    #[error("no limit cycle: {0}")]
    NoCycle(String),

    #[error("degenerate Floquet spectrum: {count} multipliers within {tol:e} of 1")]
    Degenerate { count: usize, tol: f64 },

    #[error("invalid sector index: {0}")]
    IndexError(String),

    #[error("superoperator dimension {dimension} needs ~{required_mb} MB, above the {cap_mb} MB cap; use the matrix-free operator or raise the cap")]
    OutOfMemory {
        dimension: usize,
        required_mb: usize,
        cap_mb: usize,
    },

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("steady state is not unique (distance between independent null vectors {separation:e})")]
    NonUniqueNullSpace { separation: f64 },

    #[error("rate matrix solve failed (residual {residual:e})")]
    SingularRateMatrix { residual: f64 },

    #[error("ground state degenerate: gap {gap:e}")]
    DegenerateGround { gap: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;
