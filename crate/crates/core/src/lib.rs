//! Analytic spectra and eigenvector-overlap correlators of large time-lagged
//! correlation matrices, with a Monte-Carlo harness to validate them.
//!
//! * [`roots`]: cubic/quartic solvers, branch selection, Newton.
//! * [`frv`]: Wishart/anti-Wishart transforms, free sums and products of projectors.
//! * [`quasi1d`]: symmetrized, whitened, Abelized and Haagerup–Larsen radial laws.
//! * [`qgreen`]: quaternionic Green's function solver for `X A X† / T`.
//! * [`lag2d`]: unit-lag, half-lag and rational deep-lag laws, spectral radius.
//! * [`mc`]: Gaussian ensembles, biorthogonal eigendecomposition, empirical curves.
//! * [`io`]: curve/record/matrix files and analytic-vs-empirical comparison.

pub mod error;
pub mod frv;
pub mod io;
pub mod lag2d;
pub mod mc;
pub mod qgreen;
pub mod quad;
pub mod quasi1d;
pub mod quaternion;
pub mod roots;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use quasi1d::{RadialCurve, SupportRing, ZeroModeConvention};
pub use quaternion::Quaternion2;

use serde::{Deserialize, Serialize};

/// Ensemble dimensions: `N` series of length `T`, lag `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub t: usize,
    pub tau: usize,
}

impl ModelParams {
    pub fn new(n: usize, t: usize, tau: usize) -> Result<Self> {
        if n < 1 || t < 1 {
            return Err(Error::InvalidInput("N and T must be positive".into()));
        }
        if tau >= t {
            return Err(Error::InvalidInput(format!("lag tau = {tau} must be below T = {t}")));
        }
        Ok(Self { n, t, tau })
    }

    /// Rectangularity `N / T`.
    pub fn r(&self) -> f64 {
        self.n as f64 / self.t as f64
    }

    /// Lag depth `tau / T`.
    pub fn beta(&self) -> f64 {
        self.tau as f64 / self.t as f64
    }

    /// `1 / (1 - beta) = T / (T - tau)`.
    pub fn alpha(&self) -> f64 {
        self.t as f64 / (self.t - self.tau) as f64
    }
}
