use thiserror::Error;

/// Errors raised by the numerical laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} coordinates, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("point is not on the boundary: rho = {rho:e} exceeds tolerance {tol:e}")]
    NotOnBoundary { rho: f64, tol: f64 },

    #[error("defining function has vanishing gradient at the point")]
    DegenerateGradient,

    #[error("point is not inside the domain: rho = {rho:e}")]
    OutsideDomain { rho: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("capability unavailable: {0}")]
    Capability(String),

    #[error("non-finite value at quadrature node {node}: {message}")]
    Numeric { node: usize, message: String },

    #[error("ill-conditioned Gram matrix: smallest eigenvalue {smallest:e} (largest {largest:e})")]
    Conditioning { smallest: f64, largest: f64 },

    #[error("kernel diagonal {value:e} underflows")]
    Underflow { value: f64 },

    #[error("symbol parse error at byte {pos}: {message}")]
    SymbolParse { pos: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
