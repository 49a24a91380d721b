//! Monte-Carlo ensembles of lagged correlation matrices: Gaussian data,
//! matrix construction, biorthogonal eigendecomposition and binned radial
//! statistics.
//!
//! Every sample draws from its own ChaCha stream keyed by `(seed, index)`,
//! so runs are reproducible regardless of the number of worker threads.

mod empirical;
mod ensemble;
mod spectrum;

pub use empirical::{
    default_edges, empirical_line, empirical_overlap, empirical_radial, radial_sup_cdf_error, real_sup_cdf_error, EmpiricalCurve,
    LineHistogram, TabulatedCdf,
};
pub use ensemble::{
    build_lagged, independent_product, sample_gaussian, symmetrized_sample, whitened_square, EnsembleSpec, Field,
    Variant,
};
pub use spectrum::{eigen_biorthogonal, eigen_hermitian, run_ensemble, EnsembleRun, Rejection, SpectrumSample};
