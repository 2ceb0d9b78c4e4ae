//! Error type shared by all modules.

use thiserror::Error;

/// Failures surfaced by the solvers and builders.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The right-hand side of a periodic elliptic problem has a mean that is too large.
    #[error("incompatible right-hand side in {context}: mean {mean:.3e} vs norm {norm:.3e}")]
    IncompatibleRhs { context: String, mean: f64, norm: f64 },
    #[error("iterative solve did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("symmetry violated for abar[{n}][{m}]: residual {residual:.3e}")]
    SymmetryViolation { n: usize, m: usize, residual: f64 },
    #[error("q~[{n}][0] is not divergence free: {residual:.3e}")]
    NonDivergenceFree { n: usize, residual: f64 },
    #[error("spectral gap {gap:.3e} at xi = {xi} below threshold")]
    DegenerateGroundState { xi: f64, gap: f64 },
    #[error("time quadrature did not converge (omega = {omega:.3e}, last change {change:.3e})")]
    QuadratureFailure { omega: f64, change: f64 },
    #[error("effective symbol not positive at xi = {xi}: mu = {mu:.3e}")]
    IllPosedSymbol { xi: f64, mu: f64 },
    #[error("needs time derivative of order {needed}, impulse provides {available}")]
    InsufficientTimeDerivatives { needed: usize, available: usize },
    #[error("time step {dt:.3e} exceeds stability limit {limit:.3e}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("grid not commensurate with eps: {0}")]
    NonCommensurate(String),
    #[error("missing corrector {0}")]
    MissingCorrector(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
