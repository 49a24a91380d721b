use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the analytic solvers, the Monte-Carlo pipeline and file handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("branch lost: no admissible root among {candidates:?} ({reason})")]
    BranchLost {
        candidates: Vec<Complex64>,
        reason: String,
    },

    #[error("pole of {what} at z = {at}")]
    Pole { what: &'static str, at: Complex64 },

    #[error("singular {0}")]
    Singular(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e}, last iterate {last:?})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("continuation failed at w = {failed_w:e}; last converged w = {last_converged_w:?}")]
    Continuation {
        failed_w: f64,
        last_converged_w: Option<f64>,
    },

    #[error("quadrature did not reach tolerance {requested:e} (achieved {achieved:e})")]
    Quadrature { requested: f64, achieved: f64 },

    #[error("grid too coarse: derivative estimate changes by {relative_change:.3} under refinement")]
    Resolution { relative_change: f64 },

    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BranchLost { .. }
                | Error::Pole { .. }
                | Error::Singular(_)
                | Error::NonConvergence { .. }
                | Error::Continuation { .. }
                | Error::Quadrature { .. }
                | Error::Resolution { .. }
                | Error::Linalg(_)
        )
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
