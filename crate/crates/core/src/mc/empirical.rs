use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::spectrum::SpectrumSample;
use crate::error::{Error, Result};
use crate::quad::tanh_sinh;

/// Binned radial statistics over annuli `[edges[k], edges[k + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCurve {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// `count_k / (samples N area_k)`.
    pub density: Vec<f64>,
    /// `sum O_ii / (samples N^2 area_k)`.
    pub overlap: Option<Vec<f64>>,
    /// Bins without eigenvalues; their estimates are 0 and must not be trusted.
    pub empty: Vec<bool>,
    pub samples: usize,
    pub n: usize,
    /// Eigenvalues dropped by the real-axis band.
    pub excluded: u64,
    /// Eigenvalues beyond the last edge.
    pub beyond: u64,
}

impl EmpiricalCurve {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn areas(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| PI * (w[1] * w[1] - w[0] * w[0])).collect()
    }

    /// `sum rho_k area_k`: the fraction of eigenvalues inside the binned range.
    pub fn mass(&self) -> f64 {
        self.density.iter().zip(self.areas()).map(|(d, a)| d * a).sum()
    }

    /// `sum O_k area_k`, equal to the mean of `sum_i O_ii / N^2` over binned eigenvalues.
    pub fn overlap_mass(&self) -> Option<f64> {
        self.overlap
            .as_ref()
            .map(|o| o.iter().zip(self.areas()).map(|(d, a)| d * a).sum())
    }
}

/// `bins` equal-width annuli on `[0, 1.1 s_ext]`.
pub fn default_edges(s_ext: f64, bins: usize) -> Vec<f64> {
    let top = 1.1 * s_ext;
    (0..=bins).map(|k| top * k as f64 / bins as f64).collect()
}

fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 || edges[0] < 0.0 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("bin edges must be nonnegative and strictly increasing".into()));
    }
    Ok(())
}

fn excluded_by(band: Option<f64>, im: f64) -> bool {
    band.is_some_and(|b| im.abs() < b)
}

fn bin(
    samples: &[SpectrumSample],
    n: usize,
    edges: &[f64],
    real_band: Option<f64>,
    with_overlap: bool,
) -> Result<EmpiricalCurve> {
    check_edges(edges)?;
    if samples.is_empty() {
        return Err(Error::InvalidInput("no accepted samples".into()));
    }
    let bins = edges.len() - 1;
    let mut counts = vec![0u64; bins];
    let mut sums = vec![0.0; bins];
    let (mut excluded, mut beyond) = (0u64, 0u64);
    for sample in samples {
        let overlaps = match (with_overlap, &sample.overlaps) {
            (true, Some(o)) => Some(o),
            (true, None) => {
                return Err(Error::InvalidInput(format!("sample {} carries no overlaps", sample.sample_index)))
            }
            (false, _) => None,
        };
        for (i, z) in sample.eigenvalues.iter().enumerate() {
            if excluded_by(real_band, z.im) {
                excluded += 1;
                continue;
            }
            let s = z.norm();
            // first edge strictly above s
            let k = edges.partition_point(|&e| e <= s);
            if k == 0 || k > bins {
                beyond += 1;
                continue;
            }
            counts[k - 1] += 1;
            if let Some(o) = overlaps {
                sums[k - 1] += o[i];
            }
        }
    }
    let norm = samples.len() as f64 * n as f64;
    let areas: Vec<f64> = edges.windows(2).map(|w| PI * (w[1] * w[1] - w[0] * w[0])).collect();
    let density = counts.iter().zip(&areas).map(|(&c, a)| c as f64 / (norm * a)).collect();
    let overlap = with_overlap.then(|| sums.iter().zip(&areas).map(|(s, a)| s / (norm * n as f64 * a)).collect());
    Ok(EmpiricalCurve {
        edges: edges.to_vec(),
        empty: counts.iter().map(|&c| c == 0).collect(),
        counts,
        density,
        overlap,
        samples: samples.len(),
        n,
        excluded,
        beyond,
    })
}

/// Radial density histogram of `N x N` spectra. Eigenvalues with
/// `|Im| < real_band` are skipped (real-field ensembles pile up on the real axis).
pub fn empirical_radial(
    samples: &[SpectrumSample],
    n: usize,
    edges: &[f64],
    real_band: Option<f64>,
) -> Result<EmpiricalCurve> {
    bin(samples, n, edges, real_band, false)
}

/// Like [`empirical_radial`], with the binned overlap correlator as well.
pub fn empirical_overlap(
    samples: &[SpectrumSample],
    n: usize,
    edges: &[f64],
    real_band: Option<f64>,
) -> Result<EmpiricalCurve> {
    bin(samples, n, edges, real_band, true)
}

/// Histogram of real spectra over `[edges[k], edges[k + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// `count_k / (samples N width_k)`.
    pub density: Vec<f64>,
    pub empty: Vec<bool>,
    pub samples: usize,
    pub n: usize,
    /// Eigenvalues left of the first edge.
    pub below: u64,
    /// Eigenvalues at or right of the last edge.
    pub above: u64,
}

impl LineHistogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn mass(&self) -> f64 {
        self.density.iter().zip(self.widths()).map(|(d, w)| d * w).sum()
    }
}

/// Histogram of the real parts of the eigenvalues (Hermitian ensembles).
pub fn empirical_line(samples: &[SpectrumSample], n: usize, edges: &[f64]) -> Result<LineHistogram> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("bin edges must be strictly increasing".into()));
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput("no accepted samples".into()));
    }
    let bins = edges.len() - 1;
    let mut counts = vec![0u64; bins];
    let (mut below, mut above) = (0u64, 0u64);
    for x in samples.iter().flat_map(|s| s.eigenvalues.iter()).map(|z| z.re) {
        let k = edges.partition_point(|&e| e <= x);
        if k == 0 {
            below += 1;
        } else if k > bins {
            above += 1;
        } else {
            counts[k - 1] += 1;
        }
    }
    let norm = samples.len() as f64 * n as f64;
    let density = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, w)| c as f64 / (norm * (w[1] - w[0])))
        .collect();
    Ok(LineHistogram {
        edges: edges.to_vec(),
        empty: counts.iter().map(|&c| c == 0).collect(),
        counts,
        density,
        samples: samples.len(),
        n,
        below,
        above,
    })
}

/// Kolmogorov distance between the empirical CDF of `values` and `cdf`.
fn ks_distance(mut values: Vec<f64>, cdf: &dyn Fn(f64) -> Result<f64>) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("no values".into()));
    }
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mut sup = 0.0_f64;
    for (i, &x) in values.iter().enumerate() {
        let f = cdf(x)?;
        sup = sup.max((f - i as f64 / n).abs()).max((f - (i + 1) as f64 / n).abs());
    }
    Ok(sup)
}

/// Sup distance between the radial CDF of all eigenvalues and `cdf(s)`.
pub fn radial_sup_cdf_error(
    samples: &[SpectrumSample],
    real_band: Option<f64>,
    cdf: &dyn Fn(f64) -> Result<f64>,
) -> Result<f64> {
    let values = samples
        .iter()
        .flat_map(|s| s.eigenvalues.iter())
        .filter(|z| !excluded_by(real_band, z.im))
        .map(|z| z.norm())
        .collect();
    ks_distance(values, cdf)
}

/// Sup distance between the CDF of the real parts and `cdf(x)` (Hermitian ensembles).
pub fn real_sup_cdf_error(samples: &[SpectrumSample], cdf: &dyn Fn(f64) -> Result<f64>) -> Result<f64> {
    let values = samples.iter().flat_map(|s| s.eigenvalues.iter()).map(|z| z.re).collect();
    ks_distance(values, cdf)
}

/// Piecewise-linear CDF through tabulated points, clamped to the end values,
/// plus point masses `(position, weight)` counted at and above their position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedCdf {
    pub xs: Vec<f64>,
    pub fs: Vec<f64>,
    pub atoms: Vec<(f64, f64)>,
}

impl TabulatedCdf {
    pub fn new(xs: Vec<f64>, fs: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != fs.len() || xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("tabulated CDF needs ascending abscissae".into()));
        }
        Ok(Self { xs, fs, atoms: Vec::new() })
    }

    /// Cumulative integral of `density` on `points` equal pieces of `[lo, hi]`,
    /// starting from `offset` (the mass of atoms below `lo`). Atoms inside the
    /// interval are added through `atoms` as `(position, weight)`.
    pub fn from_density<F: FnMut(f64) -> f64>(
        mut density: F,
        lo: f64,
        hi: f64,
        points: usize,
        offset: f64,
        atoms: &[(f64, f64)],
        tol: f64,
    ) -> Result<Self> {
        let xs: Vec<f64> = (0..=points).map(|k| lo + (hi - lo) * k as f64 / points as f64).collect();
        let mut fs = Vec::with_capacity(xs.len());
        let mut acc = offset;
        fs.push(acc);
        for w in xs.windows(2) {
            acc += tanh_sinh(&mut density, w[0], w[1], tol)?;
            fs.push(acc);
        }
        let mut table = Self::new(xs, fs)?;
        table.atoms = atoms.to_vec();
        Ok(table)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().filter(|a| a.0 <= x).map(|a| a.1).sum();
        let n = self.xs.len();
        let smooth = if x <= self.xs[0] {
            self.fs[0]
        } else if x >= self.xs[n - 1] {
            self.fs[n - 1]
        } else {
            let k = self.xs.partition_point(|&e| e <= x);
            let (x0, x1) = (self.xs[k - 1], self.xs[k]);
            let t = (x - x0) / (x1 - x0);
            self.fs[k - 1] + t * (self.fs[k] - self.fs[k - 1])
        };
        smooth + atoms
    }
}
