use thiserror::Error;

/// Errors raised by the shape optimization library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The gauge function (nearly) vanishes, so the body is unbounded.
    #[error("degenerate body: min u = {min_u:e} below u_min = {u_min:e}")]
    Degenerate { min_u: f64, u_min: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("support arc could not be identified: {0}")]
    SupportNotFound(String),

    #[error("not enough atoms to build a polygon (found {0}, need 3)")]
    TooFewAtoms(usize),

    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("resolution mismatch: fine grid has {fine} nodes, expected {expected}")]
    ResolutionMismatch { fine: usize, expected: usize },

    #[error("linear solver failed: {0}")]
    LinearSolver(String),

    #[error("eigensolver did not converge after {iterations} iterations (relative change {residual:e})")]
    EigenNotConverged { iterations: usize, residual: f64 },

    #[error("non-positive base {base:e} raised to non-integer exponent {exponent}")]
    NonPositiveBase { base: f64, exponent: f64 },

    #[error("infeasible perturbation: {0}")]
    InfeasiblePerturbation(String),

    #[error("infeasible constraint set: {0}")]
    Infeasible(String),

    #[error("active-set QP failed: {0}")]
    QpFailure(String),

    #[error("NNLS failed: {0}")]
    NnlsFailure(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
