use ndarray::Array2;
use ndarray_linalg::{Eig, EigValsh, Inverse, UPLO};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::EnsembleSpec;
use crate::error::{Error, Result};

/// Samples whose eigenvector matrix is worse conditioned than this are rejected.
pub const MAX_CONDITION: f64 = 1e12;
/// Largest accepted `|<L_i|R_j> - delta_ij|`.
pub const MAX_BIORTHOGONALITY_RESIDUAL: f64 = 1e-8;

/// Eigenvalues of one matrix and, for non-Hermitian input, the diagonal overlaps
/// `O_ii = <L_i|L_i><R_i|R_i>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub sample_index: u64,
    pub eigenvalues: Vec<Complex64>,
    pub overlaps: Option<Vec<f64>>,
    /// `|V|_F |V^{-1}|_F` (1 for Hermitian input).
    pub condition: f64,
    pub biorthogonality_residual: f64,
}

/// Why a sample was dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub sample_index: u64,
    pub reason: String,
}

fn frobenius(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Right eigenvectors `V` from the dense solver, left eigenvectors as the rows
/// of `V^{-1}`, so `<L_i|R_j> = delta_ij` by construction.
pub fn eigen_biorthogonal(c: &Array2<Complex64>, sample_index: u64) -> Result<SpectrumSample> {
    let n = c.nrows();
    let (values, v) = c.eig()?;
    let vinv = v
        .inv()
        .map_err(|e| Error::Singular(format!("eigenvector matrix is singular: {e}")))?;
    let condition = frobenius(&v) * frobenius(&vinv) / n as f64;
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular(format!("eigenvector condition {condition:e} exceeds {MAX_CONDITION:e}")));
    }
    let product = vinv.dot(&v);
    let residual = product
        .indexed_iter()
        .map(|((i, j), x)| (x - if i == j { 1.0 } else { 0.0 }).norm())
        .fold(0.0_f64, f64::max);
    if !(residual <= MAX_BIORTHOGONALITY_RESIDUAL) {
        return Err(Error::Singular(format!("biorthogonality residual {residual:e}")));
    }
    let overlaps = (0..n)
        .map(|i| {
            let left: f64 = vinv.row(i).iter().map(|x| x.norm_sqr()).sum();
            let right: f64 = v.column(i).iter().map(|x| x.norm_sqr()).sum();
            left * right
        })
        .collect();
    Ok(SpectrumSample {
        sample_index,
        eigenvalues: values.to_vec(),
        overlaps: Some(overlaps),
        condition,
        biorthogonality_residual: residual,
    })
}

/// Real spectrum of a Hermitian matrix.
pub fn eigen_hermitian(c: &Array2<Complex64>, sample_index: u64) -> Result<SpectrumSample> {
    let values = c.eigvalsh(UPLO::Lower)?;
    Ok(SpectrumSample {
        sample_index,
        eigenvalues: values.iter().map(|&l| Complex64::new(l, 0.0)).collect(),
        overlaps: None,
        condition: 1.0,
        biorthogonality_residual: 0.0,
    })
}

/// Accepted samples in index order plus the rejected ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRun {
    pub spec: EnsembleSpec,
    pub samples: Vec<SpectrumSample>,
    pub rejected: Vec<Rejection>,
}

impl EnsembleRun {
    pub fn rejection_count(&self) -> usize {
        self.rejected.len()
    }
}

/// Generates, builds and decomposes every sample on the current rayon pool.
/// Ill-conditioned samples are rejected, other failures abort the run.
pub fn run_ensemble(spec: &EnsembleSpec) -> Result<EnsembleRun> {
    spec.validate()?;
    let outcomes: Vec<Result<std::result::Result<SpectrumSample, Rejection>>> = (0..spec.samples as u64)
        .into_par_iter()
        .map(|index| {
            let c = spec.build(index)?;
            let decomposed = if spec.variant.is_hermitian() {
                eigen_hermitian(&c, index)
            } else {
                eigen_biorthogonal(&c, index)
            };
            match decomposed {
                Ok(s) => Ok(Ok(s)),
                Err(Error::Singular(reason)) => Ok(Err(Rejection {
                    sample_index: index,
                    reason,
                })),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut samples = Vec::with_capacity(spec.samples);
    let mut rejected = Vec::new();
    for outcome in outcomes {
        match outcome? {
            Ok(s) => samples.push(s),
            Err(r) => rejected.push(r),
        }
    }
    Ok(EnsembleRun {
        spec: *spec,
        samples,
        rejected,
    })
}
