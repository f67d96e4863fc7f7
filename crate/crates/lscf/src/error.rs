use thiserror::Error;

/// Errors shared by all library modules. Numeric payloads are reported as
/// `f64` regardless of the working scalar.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("spatial dimension must be 1, 2, or 3 (got {0})")]
    BadDimension(usize),

    #[error("grid points per axis n={n} must be a positive multiple of the period L={l}")]
    NonAlignedGrid { n: usize, l: usize },

    #[error("invalid parameter: {0}")]
    BadParam(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("Poisson source has nonzero mean {mean:e} (tolerance {tol:e}); charge is not balanced")]
    NonNeutralSource { mean: f64, tol: f64 },

    #[error("potential is degenerate (max = min); supply an explicit cut level")]
    DegeneratePotential,

    #[error("effective potential must be strictly positive (min = {0:e})")]
    NonPositivePotential(f64),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
        /// Per-iteration residual history, when the failing solver records one.
        history: Vec<(usize, f64)>,
    },

    #[error("problem too large for a dense solve ({size} > {limit})")]
    TooLarge { size: usize, limit: usize },

    #[error("quadrature failed to reach relative tolerance {tol:e} (error estimate {estimate:e})")]
    QuadratureFailure { tol: f64, estimate: f64 },

    #[error("no bracket found for the chemical potential; target mean density looks unreachable")]
    NoBracket,

    #[error("occupation numbers violate the box constraint [0, 1] by {0:e}")]
    BadOccupation(f64),

    #[error("occupation touches the box boundary; entropy gradient is undefined there")]
    BoundaryTouch,
}

impl Error {
    pub(crate) fn no_convergence(what: &'static str, iterations: usize, residual: f64) -> Self {
        Error::NoConvergence {
            what,
            iterations,
            residual,
            history: Vec::new(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
