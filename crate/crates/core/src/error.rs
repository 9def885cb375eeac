use num_complex::Complex64;
use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain parameters: {0}")]
    InvalidDomain(String),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "quadrature target {target:e} unreachable within {budget} nodes (achieved {achieved:e})"
    )]
    QuadratureBudget {
        target: f64,
        achieved: f64,
        budget: usize,
    },

    #[error("integrand is not finite at node {index} ({node})")]
    NonFiniteIntegrand { index: usize, node: Complex64 },

    #[error("orthonormality lost at degree {degree}: defect {defect:e}")]
    Orthogonalization { degree: usize, defect: f64 },

    #[error("reproducing kernel underflow at {z}: point lies outside the numerical support")]
    KernelUnderflow { z: Complex64 },

    #[error("IRLS did not converge in {iterations} iterations (best {best:e}, last change {last_change:e})")]
    NoConvergence {
        iterations: usize,
        best: f64,
        last_change: f64,
    },

    #[error(
        "Green function residual {residual:e} exceeds tolerance {tol:e} after {charges} charges"
    )]
    GreenResidual {
        residual: f64,
        tol: f64,
        charges: usize,
    },

    #[error("point {0} is not exterior to the domain")]
    NotExterior(Complex64),

    #[error("level curve tracing dropped {dropped} of {total} samples")]
    LevelCurve { dropped: usize, total: usize },

    #[error("experiment failed at n = {n}, z = {z}: {source}")]
    Experiment {
        n: usize,
        z: Complex64,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
