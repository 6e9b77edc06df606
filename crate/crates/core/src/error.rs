use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two operands (or a vector and a dimension) disagree in size.
    DimMismatch { expected: usize, found: usize },
    /// Cholesky factorization hit a non-positive pivot.
    NotSpd,
    /// Condition number above the configured guard.
    IllConditioned { condition: f64, max: f64 },
    /// Argument outside the domain of the function (non-positive scalar,
    /// a zero parameter in a formula that divides by it, ...).
    Domain(&'static str),
    /// Distribution or configuration parameters violate their invariants.
    InvalidParams(&'static str),
    /// Wishart shape outside the Gindikin set for this dimension.
    InvalidLambda { lambda: f64, dim: usize },
    /// A product that is symmetric in exact arithmetic came out too asymmetric.
    SymmetryLoss { deviation: f64 },
    /// A statistical test was handed fewer observations than it needs.
    TooFewSamples { found: usize, required: usize },
    /// MCMC diagnostics outside the accepted band.
    NonConvergence { acceptance: f64, ess_per_draw: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NotSpd => f.write_str("matrix is not positive definite"),
            Error::IllConditioned { condition, max } => {
                write!(f, "condition number {condition:.3e} exceeds guard {max:.3e}")
            }
            Error::Domain(what) => write!(f, "domain error: {what}"),
            Error::InvalidParams(what) => write!(f, "invalid parameters: {what}"),
            Error::InvalidLambda { lambda, dim } => {
                write!(f, "lambda = {lambda} is not an admissible Wishart shape for r = {dim}")
            }
            Error::SymmetryLoss { deviation } => {
                write!(f, "output asymmetry {deviation:.3e} exceeds tolerance")
            }
            Error::TooFewSamples { found, required } => {
                write!(f, "need at least {required} samples, got {found}")
            }
            Error::NonConvergence {
                acceptance,
                ess_per_draw,
            } => write!(
                f,
                "chain did not mix: acceptance {acceptance:.3}, ESS per draw {ess_per_draw:.4}"
            ),
        }
    }
}

impl core::error::Error for Error {}
