use thiserror::Error;

/// Errors raised by the symmetrization laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("mass {requested} out of range (available {available})")]
    OutOfRange { requested: f64, available: f64 },
    #[error("region has empty intersection with the truncation box")]
    EmptyRegion,
    #[error("indicator grids do not share dims and box")]
    GridMismatch,
    #[error("set has no resolvable boundary")]
    NoBoundary,
    #[error("Minkowski difference quotients did not converge (relative oscillation {0:.3})")]
    Nonconvergent(f64),
    #[error("height field is infinite on {0} cells")]
    InfiniteHeight(usize),
    #[error("symmetrization mass defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    ResolutionInsufficient { defect: f64, tol: f64 },
    #[error("set already coincides with its equal-mass half-space")]
    AlreadyConverged,
    #[error("no density pair above eps = {0:.3e}")]
    NoDensityPair(f64),
    #[error("function is not even (max asymmetry {0:.3e})")]
    NotEven(f64),
    #[error("certified tail mass {certified:.3e} exceeds tail_tol {tail_tol:.3e}")]
    TailBoundExceeded { certified: f64, tail_tol: f64 },
    #[error("no violation found within budget")]
    NoneFound,
    #[error("io: {0}")]
    Io(String),
    #[error("format: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
