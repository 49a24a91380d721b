use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{AnalyticCurve, AnalyticFile, AnalyticParams, McCurve, McFile, Method, Record, SCHEMA, VERSION};
use crate::error::{Error, Result};
use crate::mc::{EnsembleSpec, Field, TabulatedCdf, Variant};
use crate::quasi1d::{RadialCurve, ZeroModeConvention};

/// Fraction of the support width trimmed at each edge before comparing overlaps.
pub const EDGE_FRACTION: f64 = 0.1;
/// Radial comparisons of real-field ensembles drop eigenvalues with `|Im| <` this.
pub const REAL_BAND: f64 = 1e-8;
const REL_TOL: f64 = 1e-9;

/// Analytic law against binned Monte-Carlo data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema: u32,
    pub version: String,
    /// Kolmogorov distance; exact over eigenvalue records when available,
    /// otherwise evaluated at the bin edges.
    pub sup_cdf_error: f64,
    /// `sum_k |rho_hat_k - rho(c_k)| measure_k`, the measure being the annulus
    /// area (radial) or the bin width (real line).
    pub l1_density_error: f64,
    /// `sum |O_hat - O| / sum |O|` over bins whose centres lie inside the support
    /// trimmed by [`EDGE_FRACTION`] of its width at both ends; absent for real
    /// spectra or when no bulk bin exists.
    pub overlap_rel_error_bulk: Option<f64>,
    pub rejected_samples: usize,
    pub accepted_samples: usize,
    pub bins_compared: usize,
    pub bulk_bins: usize,
    pub analytic_params: AnalyticParams,
    pub mc_params: EnsembleSpec,
    pub wall_clock_seconds: f64,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs())
}

/// Mismatches between the analytic law and the ensemble, empty when they describe
/// the same spectrum. Unit and Haagerup–Larsen laws need `tau = 1`; `deep`
/// and `half` need `tau / T` equal to their lag depth.
pub fn check_compatible(a: &AnalyticParams, m: &EnsembleSpec) -> Vec<String> {
    let mut diffs = Vec::new();
    let method_ok = match a.method {
        Method::Sym => m.variant == Variant::Symmetrized,
        Method::Whiten => m.variant == Variant::WhitenedSquare,
        Method::Unit | Method::Hl => matches!(m.variant, Variant::LaggedNilpotent | Variant::LaggedCyclic),
        Method::Half | Method::Deep => matches!(m.variant, Variant::LaggedNilpotent | Variant::IndependentProduct),
        Method::Sandwich => !m.variant.is_hermitian(),
    };
    if !method_ok {
        diffs.push(format!("method: analytic {} vs mc variant {:?}", a.method, m.variant));
    }
    let (mc_r, label) = match a.method {
        Method::Whiten => (m.n as f64 / (m.t - m.tau) as f64, "N/(T - tau)"),
        _ => (m.r(), "N/T"),
    };
    if !close(a.r, mc_r) {
        diffs.push(format!("r: analytic {} vs mc {label} = {}/{} = {mc_r}", a.r, m.n, if label == "N/T" { m.t } else { m.t - m.tau }));
    }
    let lag = |p: u64, q: u64| (m.tau as u64) * q == p * (m.t as u64);
    match a.method {
        Method::Unit | Method::Hl | Method::Sym if m.tau != 1 => {
            diffs.push(format!("tau: analytic {} is the unit lag (tau = 1) vs mc tau = {}", a.method, m.tau));
        }
        Method::Half if !lag(1, 2) => {
            diffs.push(format!("beta: analytic 1/2 vs mc tau/T = {}/{}", m.tau, m.t));
        }
        Method::Deep => {
            if let Some((p, q)) = a.beta {
                if !lag(p, q) {
                    diffs.push(format!("beta: analytic {p}/{q} vs mc tau/T = {}/{}", m.tau, m.t));
                }
                if m.variant == Variant::IndependentProduct && 2 * p < q {
                    diffs.push(format!("beta: independent_product needs beta >= 1/2, analytic {p}/{q}"));
                }
            }
        }
        _ => {}
    }
    diffs
}

/// Piecewise-linear interpolation on an ascending grid; `None` outside it.
fn interpolate(grid: &[f64], values: &[f64], x: f64) -> Option<f64> {
    let n = grid.len();
    if x < grid[0] || x > grid[n - 1] {
        return None;
    }
    let k = grid.partition_point(|&g| g <= x).clamp(1, n - 1);
    let (x0, x1) = (grid[k - 1], grid[k]);
    let (y0, y1) = (values[k - 1], values[k]);
    if x == x0 {
        return Some(y0);
    }
    if x == x1 {
        return Some(y1);
    }
    let t = (x - x0) / (x1 - x0);
    Some(y0 + t * (y1 - y0))
}

fn coverage_error(what: &str, lo: f64, hi: f64, grid: &[f64]) -> Error {
    Error::Incompatible(format!(
        "analytic grid [{}, {}] does not cover the {what} [{lo}, {hi}]",
        grid[0],
        grid[grid.len() - 1]
    ))
}

/// CDF of the `N x N` matrix: the cyclic-product convention counts `T` eigenvalues.
fn lagged_cdf(curve: &RadialCurve) -> Vec<f64> {
    match curve.convention {
        ZeroModeConvention::LaggedMatrix => curve.cdf.clone(),
        ZeroModeConvention::CyclicProduct => curve.cdf.iter().map(|f| (f - 1.0) / curve.r + 1.0).collect(),
    }
}

/// Sup distance between a sorted sample and `cdf`.
fn ks(sorted: &[f64], cdf: &TabulatedCdf) -> f64 {
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0_f64, |sup, (i, &x)| {
        let f = cdf.eval(x);
        sup.max((f - i as f64 / n).abs()).max((f - (i + 1) as f64 / n).abs())
    })
}

/// Sup distance evaluated at the bin edges only; a lower bound of [`ks`].
fn binned_ks(edges: &[f64], counts: &[u64], total: f64, below: f64, cdf: &TabulatedCdf) -> f64 {
    let mut acc = below;
    let mut sup = (cdf.eval(edges[0]) - acc / total).abs();
    for (k, &c) in counts.iter().enumerate() {
        acc += c as f64;
        sup = sup.max((cdf.eval(edges[k + 1]) - acc / total).abs());
    }
    sup
}

/// Compares an analytic curve with binned Monte-Carlo data, refusing mismatched
/// parameters. `records` (the raw eigenvalues of the same run) make the CDF
/// distance exact.
pub fn compare(analytic: &AnalyticFile, mc: &McFile, records: Option<&[Record]>) -> Result<ComparisonReport> {
    let start = Instant::now();
    let diffs = check_compatible(&analytic.params, &mc.params);
    if !diffs.is_empty() {
        return Err(Error::Incompatible(diffs.join("; ")));
    }
    let band = (mc.params.field == Field::Real).then_some(REAL_BAND);
    let accepted = match &mc.curve {
        McCurve::Radial(c) => c.samples,
        McCurve::Line(c) => c.samples,
    };
    let (sup, l1, overlap, bins, bulk) = match (&analytic.curve, &mc.curve) {
        (AnalyticCurve::Radial(a), McCurve::Radial(e)) => {
            let cdf = TabulatedCdf::new(a.grid.clone(), lagged_cdf(a))?;
            let sup = match records {
                Some(rs) => {
                    let mut s: Vec<f64> = rs
                        .iter()
                        .filter(|r| band.is_none_or(|b| r.im.abs() >= b))
                        .map(|r| r.re.hypot(r.im))
                        .collect();
                    if s.is_empty() {
                        return Err(Error::InvalidInput("no eigenvalue records".into()));
                    }
                    s.sort_by(f64::total_cmp);
                    ks(&s, &cdf)
                }
                None => {
                    let total = (e.samples * e.n) as f64 - e.excluded as f64;
                    binned_ks(&e.edges, &e.counts, total, 0.0, &cdf)
                }
            };
            let centers = e.centers();
            let areas = e.areas();
            let (lo, hi) = (centers[0], centers[centers.len() - 1]);
            let mut l1 = 0.0;
            let mut bins = 0;
            for k in 0..centers.len() {
                let rho = interpolate(&a.grid, &a.density, centers[k]).ok_or_else(|| coverage_error("bin centres", lo, hi, &a.grid))?;
                if rho.is_finite() {
                    l1 += (e.density[k] - rho).abs() * areas[k];
                    bins += 1;
                }
            }
            let ring = a.ring;
            let trim = EDGE_FRACTION * (ring.s_ext - ring.s_int);
            let (mut num, mut den, mut bulk) = (0.0, 0.0, 0);
            if let Some(o_hat) = &e.overlap {
                for k in 0..centers.len() {
                    let c = centers[k];
                    if c < ring.s_int + trim || c > ring.s_ext - trim {
                        continue;
                    }
                    match interpolate(&a.grid, &a.overlap, c) {
                        Some(o) if o.is_finite() => {
                            num += (o_hat[k] - o).abs();
                            den += o.abs();
                            bulk += 1;
                        }
                        _ => {}
                    }
                }
            }
            let overlap = (bulk > 0 && den > 0.0).then(|| num / den);
            (sup, l1, overlap, bins, bulk)
        }
        (AnalyticCurve::Line(a), McCurve::Line(e)) => {
            let mut cdf = TabulatedCdf::new(a.grid.clone(), a.cdf.clone())?;
            // the tabulated CDF already contains the atoms; shift them out so eval adds them once
            for k in 0..cdf.xs.len() {
                let x = cdf.xs[k];
                cdf.fs[k] -= a.atoms.iter().filter(|t| t.0 <= x).map(|t| t.1).sum::<f64>();
            }
            cdf.atoms = a.atoms.clone();
            let sup = match records {
                Some(rs) => {
                    let mut s: Vec<f64> = rs.iter().map(|r| r.re).collect();
                    if s.is_empty() {
                        return Err(Error::InvalidInput("no eigenvalue records".into()));
                    }
                    s.sort_by(f64::total_cmp);
                    ks(&s, &cdf)
                }
                None => {
                    let total = (e.samples * e.n) as f64;
                    binned_ks(&e.edges, &e.counts, total, e.below as f64, &cdf)
                }
            };
            let centers = e.centers();
            let widths = e.widths();
            let (lo, hi) = (centers[0], centers[centers.len() - 1]);
            let mut l1 = 0.0;
            let mut bins = 0;
            for k in 0..centers.len() {
                let rho = interpolate(&a.grid, &a.density, centers[k]).ok_or_else(|| coverage_error("bin centres", lo, hi, &a.grid))?;
                if rho.is_finite() {
                    l1 += (e.density[k] - rho).abs() * widths[k];
                    bins += 1;
                }
            }
            (sup, l1, None, bins, 0)
        }
        _ => {
            return Err(Error::Incompatible(
                "one file holds a radial law and the other a real-line law".into(),
            ))
        }
    };
    Ok(ComparisonReport {
        schema: SCHEMA,
        version: VERSION.into(),
        sup_cdf_error: sup,
        l1_density_error: l1,
        overlap_rel_error_bulk: overlap,
        rejected_samples: mc.rejected.len(),
        accepted_samples: accepted,
        bins_compared: bins,
        bulk_bins: bulk,
        analytic_params: analytic.params.clone(),
        mc_params: mc.params,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}
