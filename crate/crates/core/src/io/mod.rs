//! Files exchanged by the command-line tool: analytic curves, Monte-Carlo
//! records and histograms, `A` matrices for the sandwich solver, and the
//! analytic-vs-empirical comparison report.
//!
//! Every curve is written twice, as CSV and as a JSON mirror. A CSV file starts
//! with one `# {json}` line holding everything but the columns, followed by the
//! column header and the rows; numbers carry 17 significant digits, so both
//! forms parse back to identical values.

mod build;
mod compare;
pub(crate) mod nonfinite;
mod text;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use build::{analytic_file, default_mc_edges, mc_file, records_from_samples};
pub use compare::{check_compatible, compare, ComparisonReport};
pub use text::{
    parse_analytic_csv, parse_matrix, parse_mc_csv, parse_radius_csv, parse_records_csv, write_analytic_csv,
    write_matrix, write_mc_csv, write_radius_csv, write_records_csv,
};

use crate::error::{Error, Result};
use crate::mc::{EmpiricalCurve, EnsembleSpec, LineHistogram, Rejection};
use crate::quasi1d::RadialCurve;

/// Version of the file layout, bumped on incompatible changes.
pub const SCHEMA: u32 = 1;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Symmetrized part `(C + C†)/2`, real line.
    Sym,
    /// Squared whitened lagged matrix, real line; `r` is `N / (T - tau)`.
    Whiten,
    /// Haagerup–Larsen law of the cyclic product.
    Hl,
    Unit,
    Half,
    /// Rational lag `beta = p / q`.
    Deep,
    /// Quaternionic solver for a user-supplied `A`.
    Sandwich,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Sym,
        Method::Whiten,
        Method::Hl,
        Method::Unit,
        Method::Half,
        Method::Deep,
        Method::Sandwich,
    ];

    /// Real-line laws (`lambda,rho` files) as opposed to radial ones (`s,F,rho,O`).
    pub fn is_real_line(self) -> bool {
        matches!(self, Method::Sym | Method::Whiten)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Sym => "sym",
            Method::Whiten => "whiten",
            Method::Hl => "hl",
            Method::Unit => "unit",
            Method::Half => "half",
            Method::Deep => "deep",
            Method::Sandwich => "sandwich",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method {s:?}")))
    }
}

/// `start:stop:count`, `count` equally spaced points including both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|k| if k + 1 == self.count { self.stop } else { self.start + step * k as f64 })
            .collect()
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("grid {s:?} is not start:stop:count"));
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, count] = parts.as_slice() else {
            return Err(bad());
        };
        let start: f64 = start.trim().parse().map_err(|_| bad())?;
        let stop: f64 = stop.trim().parse().map_err(|_| bad())?;
        let count: usize = count.trim().parse().map_err(|_| bad())?;
        if !(start.is_finite() && stop.is_finite()) || !(stop > start) {
            return Err(Error::InvalidInput(format!("grid {s:?} needs start < stop")));
        }
        if count < 2 {
            return Err(Error::InvalidInput(format!("grid {s:?} needs at least 2 points")));
        }
        Ok(Self { start, stop, count })
    }
}

/// Lag depth `p / q` parsed from `p/q` or a decimal (approximated with small denominators).
pub fn parse_beta(s: &str) -> Result<(u64, u64)> {
    if let Some((p, q)) = s.split_once('/') {
        let bad = || Error::InvalidInput(format!("beta {s:?} is not p/q"));
        let p: u64 = p.trim().parse().map_err(|_| bad())?;
        let q: u64 = q.trim().parse().map_err(|_| bad())?;
        if q == 0 || p >= q {
            return Err(Error::InvalidInput(format!("beta {s:?} must lie in [0, 1)")));
        }
        return Ok((p, q));
    }
    let beta: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("beta {s:?} is neither p/q nor a number")))?;
    let law = crate::lag2d::LagLaw::from_beta(1.0, beta, 1 << 20)?;
    if (law.beta() - beta).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("beta {s:?} has no small rational form; pass p/q")));
    }
    Ok((law.p, law.q))
}

/// Inputs of an analytic curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticParams {
    pub method: Method,
    pub r: f64,
    /// Lag depth as `(p, q)`; required by `deep`.
    pub beta: Option<(u64, u64)>,
    /// Path of the `A` matrix; required by `sandwich`.
    pub matrix: Option<String>,
    /// Prefactor of `X A X†`, default `1 / T`.
    pub scale: Option<f64>,
}

impl AnalyticParams {
    pub fn new(method: Method, r: f64) -> Self {
        Self {
            method,
            r,
            beta: None,
            matrix: None,
            scale: None,
        }
    }

    /// Checks method-specific completeness before any computation.
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidInput(format!("r must be positive, got {}", self.r)));
        }
        if self.method == Method::Whiten && self.r >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "whiten needs r = N/(T - tau) < 1, got {}",
                self.r
            )));
        }
        match (self.method, self.beta) {
            (Method::Deep, None) => return Err(Error::InvalidInput("method deep requires --beta p/q".into())),
            (Method::Deep, Some((p, q))) if q == 0 || p >= q => {
                return Err(Error::InvalidInput(format!("beta {p}/{q} must lie in [0, 1)")))
            }
            (Method::Deep, _) => {}
            (m, Some(_)) => return Err(Error::InvalidInput(format!("method {m} takes no beta"))),
            _ => {}
        }
        match (self.method, &self.matrix) {
            (Method::Sandwich, None) => Err(Error::InvalidInput("method sandwich requires --matrix".into())),
            (Method::Sandwich, Some(_)) => match self.scale {
                Some(s) if !(s > 0.0) => Err(Error::InvalidInput("scale must be positive".into())),
                _ => Ok(()),
            },
            (m, Some(_)) => Err(Error::InvalidInput(format!("method {m} takes no matrix"))),
            (m, None) if self.scale.is_some() => Err(Error::InvalidInput(format!("method {m} takes no scale"))),
            _ => Ok(()),
        }
    }
}

/// Density of a real spectrum on a grid, with its CDF and point masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineCurve {
    pub method: Method,
    pub r: f64,
    pub grid: Vec<f64>,
    #[serde(with = "nonfinite")]
    pub density: Vec<f64>,
    /// Including the atoms at or below each grid point.
    pub cdf: Vec<f64>,
    /// `(position, weight)`.
    pub atoms: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticCurve {
    Radial(RadialCurve),
    Line(LineCurve),
}

impl AnalyticCurve {
    pub fn len(&self) -> usize {
        match self {
            AnalyticCurve::Radial(c) => c.grid.len(),
            AnalyticCurve::Line(c) => c.grid.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticFile {
    pub schema: u32,
    pub version: String,
    pub params: AnalyticParams,
    pub curve: AnalyticCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum McCurve {
    Radial(EmpiricalCurve),
    Line(LineHistogram),
}

/// Binned Monte-Carlo statistics with the ensemble that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McFile {
    pub schema: u32,
    pub version: String,
    pub params: EnsembleSpec,
    pub rejected: Vec<Rejection>,
    pub curve: McCurve,
}

/// One eigenvalue: `sample,re,im,O_ii` (the overlap is absent for Hermitian ensembles).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub sample: u64,
    pub re: f64,
    pub im: f64,
    pub overlap: Option<f64>,
}

/// Outer spectral radius against the lag depth at fixed `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusFile {
    pub schema: u32,
    pub version: String,
    pub r: f64,
    pub beta: Vec<f64>,
    pub s_ext: Vec<f64>,
}

/// `s_ext` on a grid of lag depths; each `beta` is taken as the nearest fraction
/// with denominator below `2^20`, so the cusps at `beta = 1/m` stay sharp.
pub fn radius_file(r: f64, betas: &[f64]) -> Result<RadiusFile> {
    if betas.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
        return Err(Error::InvalidInput("beta grid must lie inside (0, 1)".into()));
    }
    let s_ext = betas
        .iter()
        .map(|&b| crate::lag2d::deep_lag_radius(&crate::lag2d::LagLaw::from_beta(r, b, 1 << 20)?))
        .collect::<Result<_>>()?;
    Ok(RadiusFile {
        schema: SCHEMA,
        version: VERSION.into(),
        r,
        beta: betas.to_vec(),
        s_ext,
    })
}

/// Records file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordsFile {
    pub schema: u32,
    pub version: String,
    pub params: EnsembleSpec,
    #[serde(skip)]
    pub records: Vec<Record>,
}

fn check_schema(schema: u32) -> Result<()> {
    if schema == SCHEMA {
        Ok(())
    } else {
        Err(Error::Parse(format!("unsupported schema {schema}, expected {SCHEMA}")))
    }
}

/// Writes `contents` to a temporary file next to `path` and renames it into place,
/// so a failure never leaves a partial file behind.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn parse_analytic_json(text: &str) -> Result<AnalyticFile> {
    let file: AnalyticFile = serde_json::from_str(text)?;
    check_schema(file.schema)?;
    Ok(file)
}

pub fn parse_mc_json(text: &str) -> Result<McFile> {
    let file: McFile = serde_json::from_str(text)?;
    check_schema(file.schema)?;
    Ok(file)
}

/// Reads an analytic curve from its CSV or JSON form, chosen by extension.
pub fn read_analytic(path: &Path) -> Result<AnalyticFile> {
    let text = std::fs::read_to_string(path)?;
    if is_json(path) {
        parse_analytic_json(&text)
    } else {
        parse_analytic_csv(&text)
    }
}

/// Reads a binned Monte-Carlo curve from its CSV or JSON form, chosen by extension.
pub fn read_mc(path: &Path) -> Result<McFile> {
    let text = std::fs::read_to_string(path)?;
    if is_json(path) {
        parse_mc_json(&text)
    } else {
        parse_mc_csv(&text)
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}
