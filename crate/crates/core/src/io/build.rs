use ndarray::Array2;
use num_complex::Complex64;

use super::{AnalyticCurve, AnalyticFile, AnalyticParams, LineCurve, McCurve, McFile, Method, Record, SCHEMA, VERSION};
use crate::error::{Error, Result};
use crate::frv::{free_jacobi_measure, jacobi_upper_edge};
use crate::lag2d::{deep_lag_curve, deep_lag_radius, half_lag_curve, unit_lag_curve, LagLaw};
use crate::mc::{
    default_edges, empirical_line, empirical_overlap, empirical_radial, run_ensemble, EnsembleSpec, Field,
    SpectrumSample, Variant,
};
use crate::qgreen::{radial_density_from_f, solve_sandwich_path, ContinuationSchedule, SandwichProblem};
use crate::quad::tanh_sinh_pieces;
use crate::quasi1d::{hl_curve, sym_density, sym_support_edge, sym_zero_mode_weight, RadialCurve, SupportRing, ZeroModeConvention};

const CDF_TOL: f64 = 1e-10;
/// Bins of the default Monte-Carlo histograms.
pub const DEFAULT_BINS: usize = 64;

/// Evaluates the analytic law of `params` on `grid`. `matrix` is the `A` of the
/// sandwich method and is ignored otherwise.
pub fn analytic_file(params: &AnalyticParams, grid: &[f64], matrix: Option<&Array2<Complex64>>) -> Result<AnalyticFile> {
    params.validate()?;
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("grid must be strictly ascending with at least 2 points".into()));
    }
    let r = params.r;
    let radial_grid = || -> Result<()> {
        if grid[0] < 0.0 {
            return Err(Error::InvalidInput("radial grids must start at s >= 0".into()));
        }
        Ok(())
    };
    let curve = match params.method {
        Method::Sym => AnalyticCurve::Line(sym_line(r, grid)?),
        Method::Whiten => AnalyticCurve::Line(whiten_line(r, grid)?),
        Method::Hl => {
            radial_grid()?;
            AnalyticCurve::Radial(hl_curve(r, grid)?)
        }
        Method::Unit => {
            radial_grid()?;
            AnalyticCurve::Radial(unit_lag_curve(r, grid)?)
        }
        Method::Half => {
            radial_grid()?;
            AnalyticCurve::Radial(half_lag_curve(r, grid)?)
        }
        Method::Deep => {
            radial_grid()?;
            let (p, q) = params.beta.expect("validated");
            AnalyticCurve::Radial(deep_lag_curve(&LagLaw::new(r, p, q)?, grid)?)
        }
        Method::Sandwich => {
            radial_grid()?;
            let a = matrix.ok_or_else(|| Error::InvalidInput("method sandwich requires a matrix".into()))?;
            let scale = params.scale.unwrap_or(1.0 / a.nrows() as f64);
            let prob = SandwichProblem::new(a.clone(), r, scale)?;
            AnalyticCurve::Radial(sandwich_curve(&prob, grid)?)
        }
    };
    Ok(AnalyticFile {
        schema: SCHEMA,
        version: VERSION.into(),
        params: params.clone(),
        curve,
    })
}

/// Radial law of `prob` along the positive real axis, assuming rotational symmetry:
/// `F = Re(s g)`, density from `dF/ds`, overlap from `|v|`.
fn sandwich_curve(prob: &SandwichProblem, grid: &[f64]) -> Result<RadialCurve> {
    // the origin is a pole of G = Q^{-1}; start just off it
    let zs: Vec<Complex64> = grid
        .iter()
        .map(|&s| Complex64::new(s.max(1e-6 * grid[grid.len() - 1]), 0.0))
        .collect();
    let sols = solve_sandwich_path(prob, &zs, &ContinuationSchedule::default())?;
    let cdf: Vec<f64> = sols.iter().map(|p| (p.g * p.z).re.clamp(0.0, 1.0)).collect();
    let s: Vec<f64> = zs.iter().map(|z| z.re).collect();
    let raw = radial_density_from_f(&s, &cdf)?;
    let inside: Vec<bool> = sols.iter().map(|p| p.inside).collect();
    let s_ext = grid
        .iter()
        .zip(&inside)
        .filter(|(_, &i)| i)
        .map(|(&s, _)| s)
        .fold(0.0_f64, f64::max);
    let s_int = match inside.iter().position(|&i| i) {
        Some(k) if k > 0 => grid[k - 1],
        _ => 0.0,
    };
    let ring = SupportRing {
        s_int,
        s_ext,
        zero_mode_weight: if inside[0] { 0.0 } else { cdf[0] },
    };
    let density = grid
        .iter()
        .zip(&raw)
        .map(|(&x, &d)| if ring.region(x) == crate::quasi1d::RingRegion::Inside { d.max(0.0) } else { 0.0 })
        .collect();
    Ok(RadialCurve {
        method: "sandwich".into(),
        r: prob.r,
        beta: 0.0,
        convention: ZeroModeConvention::LaggedMatrix,
        ring,
        grid: grid.to_vec(),
        cdf,
        density,
        overlap: sols.iter().map(|p| if p.inside { p.overlap() } else { 0.0 }).collect(),
    })
}

/// Cumulative integral of `density` along `grid`, split at `kinks`, plus `atoms`.
fn cumulative(
    density: &dyn Fn(f64) -> f64,
    grid: &[f64],
    kinks: &[f64],
    atoms: &[(f64, f64)],
    below: f64,
) -> Result<Vec<f64>> {
    let mut acc = below;
    let mut out = Vec::with_capacity(grid.len());
    let atoms_at = |x: f64| -> f64 { atoms.iter().filter(|a| a.0 <= x).map(|a| a.1).sum() };
    for (k, &x) in grid.iter().enumerate() {
        if k > 0 {
            let (a, b) = (grid[k - 1], x);
            let mut breaks = vec![a];
            breaks.extend(kinks.iter().copied().filter(|&p| p > a && p < b));
            breaks.push(b);
            acc += tanh_sinh_pieces(density, &breaks, CDF_TOL)?;
        }
        out.push(acc + atoms_at(x));
    }
    Ok(out)
}

/// Continuous density of the symmetrized matrix plus its atom at zero.
fn sym_line(r: f64, grid: &[f64]) -> Result<LineCurve> {
    let edge = sym_support_edge(r)?;
    let w0 = sym_zero_mode_weight(r);
    let atoms = if w0 > 0.0 { vec![(0.0, w0)] } else { vec![] };
    let error = std::cell::RefCell::new(None);
    let density = |x: f64| -> f64 {
        if x.abs() >= edge {
            return 0.0;
        }
        sym_density(x, r).unwrap_or_else(|e| {
            error.borrow_mut().get_or_insert(e);
            0.0
        })
    };
    let values: Vec<f64> = grid.iter().map(|&x| density(x)).collect();
    // integrate up to the first grid point from the left edge
    let below = if grid[0] > -edge {
        tanh_sinh_pieces(&density, &[-edge, grid[0].min(edge)], CDF_TOL)?
    } else {
        0.0
    };
    let below = below + atoms.iter().filter(|a| a.0 < grid[0]).map(|a| a.1).sum::<f64>();
    let cdf = cumulative(&density, grid, &[-edge, 0.0, edge], &atoms, below)?;
    if let Some(e) = error.into_inner() {
        return Err(e);
    }
    Ok(LineCurve {
        method: Method::Sym,
        r,
        grid: grid.to_vec(),
        density: values,
        cdf: cdf.into_iter().map(|f| f.min(1.0)).collect(),
        atoms,
    })
}

/// Free Jacobi law with `alpha = r`, renormalized from the `T - tau` dimensional
/// projector product to the `N x N` whitened matrix: the zero atom disappears and
/// everything else is divided by `alpha`.
fn whiten_line(alpha: f64, grid: &[f64]) -> Result<LineCurve> {
    let measure = free_jacobi_measure(alpha)?;
    let edge = jacobi_upper_edge(alpha);
    let atoms = if alpha > 0.5 {
        vec![(1.0, (2.0 * alpha - 1.0) / alpha)]
    } else {
        vec![]
    };
    let density = |x: f64| measure.density(x) / alpha;
    let values = grid.iter().map(|&x| density(x)).collect();
    let cdf = grid
        .iter()
        .map(|&x| {
            if x < 0.0 {
                return Ok(0.0);
            }
            let continuous = measure.cdf(x.min(edge), CDF_TOL)? - (1.0 - alpha);
            let atom: f64 = atoms.iter().filter(|a| a.0 <= x).map(|a| a.1).sum();
            Ok((continuous / alpha + atom).clamp(0.0, 1.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(LineCurve {
        method: Method::Whiten,
        r: alpha,
        grid: grid.to_vec(),
        density: values,
        cdf,
        atoms,
    })
}

/// Outer radius (or real support) expected for `spec`, used for default bins.
fn expected_extent(spec: &EnsembleSpec) -> Result<(f64, f64)> {
    let r = spec.r();
    match spec.variant {
        Variant::Symmetrized => {
            let e = sym_support_edge(r)?;
            Ok((-1.1 * e, 1.1 * e))
        }
        Variant::WhitenedSquare => {
            let alpha = spec.n as f64 / (spec.t - spec.tau) as f64;
            let top = if alpha > 0.5 { 1.0 } else { jacobi_upper_edge(alpha) };
            Ok((-0.05 * top, 1.1 * top))
        }
        Variant::LaggedNilpotent | Variant::IndependentProduct => {
            Ok((0.0, 1.1 * deep_lag_radius(&LagLaw::new(r, spec.tau as u64, spec.t as u64)?)?))
        }
        Variant::LaggedCyclic => Ok((0.0, 1.1 * (r * (r + 1.0)).sqrt())),
    }
}

/// [`DEFAULT_BINS`] equal bins over the expected support, padded by 10%.
pub fn default_mc_edges(spec: &EnsembleSpec) -> Result<Vec<f64>> {
    let (lo, hi) = expected_extent(spec)?;
    if lo == 0.0 {
        return Ok(default_edges(hi / 1.1, DEFAULT_BINS));
    }
    Ok((0..=DEFAULT_BINS)
        .map(|k| lo + (hi - lo) * k as f64 / DEFAULT_BINS as f64)
        .collect())
}

pub fn records_from_samples(samples: &[SpectrumSample]) -> Vec<Record> {
    samples
        .iter()
        .flat_map(|s| {
            s.eigenvalues.iter().enumerate().map(move |(i, z)| Record {
                sample: s.sample_index,
                re: z.re,
                im: z.im,
                overlap: s.overlaps.as_ref().map(|o| o[i]),
            })
        })
        .collect()
}

/// Runs the ensemble and bins it; real-field radial curves skip `|Im| < 1e-8`.
pub fn mc_file(spec: &EnsembleSpec, edges: Option<Vec<f64>>) -> Result<(McFile, Vec<SpectrumSample>)> {
    spec.validate()?;
    let edges = match edges {
        Some(e) => e,
        None => default_mc_edges(spec)?,
    };
    let run = run_ensemble(spec)?;
    if run.samples.is_empty() {
        return Err(Error::Singular(format!("all {} samples were rejected", run.rejection_count())));
    }
    let curve = if spec.variant.is_hermitian() {
        McCurve::Line(empirical_line(&run.samples, spec.n, &edges)?)
    } else {
        let band = (spec.field == Field::Real).then_some(1e-8);
        McCurve::Radial(if run.samples[0].overlaps.is_some() {
            empirical_overlap(&run.samples, spec.n, &edges, band)?
        } else {
            empirical_radial(&run.samples, spec.n, &edges, band)?
        })
    };
    let file = McFile {
        schema: SCHEMA,
        version: VERSION.into(),
        params: *spec,
        rejected: run.rejected,
        curve,
    };
    Ok((file, run.samples))
}
