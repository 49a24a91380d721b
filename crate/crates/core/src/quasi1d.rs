//! Quasi-one-dimensional reductions of the lagged correlation matrix:
//! the symmetrized part `(C + C†)/2`, the Abel transform of its density onto a
//! rotationally symmetric law, and the exact radial law of the cyclic product
//! (Haagerup–Larsen cubic). The whitened law lives in [`crate::frv`].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frv::{boundary_density, DENSITY_EPS};
use crate::quad::{tanh_sinh, tanh_sinh_edges};
use crate::roots::{select_branch, solve_cubic, solve_quartic_complex, BranchSelector, PolyReal};

/// Which eigenvalues sit at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeroModeConvention {
    /// `T x T` cyclic product: `T - N` zero modes when `r < 1`, none when `r > 1`.
    CyclicProduct,
    /// `N x N` lagged matrix: `N - T` zero modes when `r > 1`, none when `r < 1`.
    LaggedMatrix,
}

impl ZeroModeConvention {
    /// Fraction of eigenvalues at zero, which is also the radial CDF at the inner edge.
    pub fn weight(self, r: f64) -> f64 {
        match self {
            Self::CyclicProduct => (1.0 - r).max(0.0),
            Self::LaggedMatrix => (1.0 - 1.0 / r).max(0.0),
        }
    }
}

/// Annulus carrying the continuous part of a rotationally symmetric spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportRing {
    pub s_int: f64,
    pub s_ext: f64,
    /// Weight of the `N x N` lagged matrix at the origin, `max(1 - 1/r, 0)`.
    pub zero_mode_weight: f64,
}

/// Position of a radius relative to a [`SupportRing`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RingRegion {
    BelowInner,
    Inside,
    AboveOuter,
}

/// A radial quantity together with the region it was evaluated in; values
/// outside the ring are clamped and flagged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingValue {
    pub value: f64,
    pub region: RingRegion,
}

impl SupportRing {
    pub fn region(&self, s: f64) -> RingRegion {
        if s <= self.s_int {
            RingRegion::BelowInner
        } else if s >= self.s_ext {
            RingRegion::AboveOuter
        } else {
            RingRegion::Inside
        }
    }
}

/// Sampled radial law: CDF, density and overlap correlator on an ascending grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialCurve {
    pub method: String,
    pub r: f64,
    pub beta: f64,
    pub convention: ZeroModeConvention,
    pub ring: SupportRing,
    pub grid: Vec<f64>,
    pub cdf: Vec<f64>,
    #[serde(with = "crate::io::nonfinite")]
    pub density: Vec<f64>,
    #[serde(with = "crate::io::nonfinite")]
    pub overlap: Vec<f64>,
}

impl RadialCurve {
    /// Checks monotonicity, ranges and the zero-density exterior up to `tol`.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let n = self.grid.len();
        if self.cdf.len() != n || self.density.len() != n || self.overlap.len() != n {
            return Err(Error::InvalidInput("curve columns differ in length".into()));
        }
        for w in self.grid.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidInput("grid is not strictly ascending".into()));
            }
        }
        for i in 0..n {
            let (f, d, o) = (self.cdf[i], self.density[i], self.overlap[i]);
            if !(f >= -tol && f <= 1.0 + tol) || d < -tol || o < -tol {
                return Err(Error::InvalidInput(format!("value out of range at s = {}", self.grid[i])));
            }
            if i > 0 && f < self.cdf[i - 1] - tol {
                return Err(Error::InvalidInput(format!("CDF decreases at s = {}", self.grid[i])));
            }
            if self.ring.region(self.grid[i]) != RingRegion::Inside && d != 0.0 {
                return Err(Error::InvalidInput(format!("density outside ring at s = {}", self.grid[i])));
            }
        }
        Ok(())
    }
}

fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("rectangularity must be positive, got {r}")))
    }
}

/// Inner and outer radius of the unit-lag spectrum and the lagged-matrix zero-mode weight.
pub fn spectral_radii(r: f64) -> Result<SupportRing> {
    check_r(r)?;
    let s_int = if r > 1.0 { (r - 1.0).powf(1.5) / r.sqrt() } else { 0.0 };
    Ok(SupportRing {
        s_int,
        s_ext: (r * (r + 1.0)).sqrt(),
        zero_mode_weight: ZeroModeConvention::LaggedMatrix.weight(r),
    })
}

fn hl_poly(s: f64, r: f64) -> Result<PolyReal> {
    let u = r - 1.0;
    let s2 = s * s;
    PolyReal::new(vec![u * u * u - r * s2, 5.0 * u * u - s2, 8.0 * u, 4.0])
}

/// Radial CDF of the cyclic product from the Haagerup–Larsen cubic; clamps to
/// `max(1 - r, 0)` below the ring and to 1 above it.
pub fn hl_radial_cdf(s: f64, r: f64) -> Result<RingValue> {
    let ring = spectral_radii(r)?;
    let lo = ZeroModeConvention::CyclicProduct.weight(r);
    let region = ring.region(s);
    let value = match region {
        RingRegion::BelowInner => lo,
        RingRegion::AboveOuter => 1.0,
        RingRegion::Inside => {
            let roots = solve_cubic(&hl_poly(s, r)?)?;
            select_branch(&roots, &BranchSelector::range(lo, 1.0, true)?)?.re
        }
    };
    Ok(RingValue { value, region })
}

/// Radial density `F'(s) / (2 pi s r)` from implicit differentiation of the cubic.
/// Normalized so that `2 pi int s rho ds` is the non-zero fraction of the `N x N` spectrum.
pub fn hl_density(s: f64, r: f64) -> Result<f64> {
    let f = hl_radial_cdf(s, r)?;
    if f.region != RingRegion::Inside {
        return Ok(0.0);
    }
    let u = r - 1.0;
    let f = f.value;
    let dp_df = 12.0 * f * f + 16.0 * u * f + 5.0 * u * u - s * s;
    let scale = 12.0 * f * f + 16.0 * (u * f).abs() + 5.0 * u * u + s * s;
    if dp_df.abs() <= 1e-13 * scale {
        return Err(Error::Singular(format!("cubic derivative vanishes at s = {s}")));
    }
    Ok((f + r) / (PI * r * dp_df))
}

/// Overlap correlator `F (1 - F) / (pi s^2)` of the cyclic product.
pub fn hl_overlap(s: f64, r: f64) -> Result<f64> {
    let f = hl_radial_cdf(s, r)?;
    match f.region {
        RingRegion::AboveOuter => Ok(0.0),
        RingRegion::BelowInner if r > 1.0 => Ok(0.0),
        _ => {
            if s == 0.0 {
                return Err(Error::Singular("overlap diverges at the origin for r < 1".into()));
            }
            Ok(f.value * (1.0 - f.value) / (PI * s * s))
        }
    }
}

/// Haagerup–Larsen law sampled on `grid`.
pub fn hl_curve(r: f64, grid: &[f64]) -> Result<RadialCurve> {
    let ring = spectral_radii(r)?;
    let mut cdf = Vec::with_capacity(grid.len());
    let mut density = Vec::with_capacity(grid.len());
    let mut overlap = Vec::with_capacity(grid.len());
    for &s in grid {
        cdf.push(hl_radial_cdf(s, r)?.value);
        density.push(hl_density(s, r)?);
        overlap.push(if s == 0.0 && r <= 1.0 { f64::INFINITY } else { hl_overlap(s, r)? });
    }
    Ok(RadialCurve {
        method: "hl".into(),
        r,
        beta: 0.0,
        convention: ZeroModeConvention::CyclicProduct,
        ring,
        grid: grid.to_vec(),
        cdf,
        density,
        overlap,
    })
}

fn sym_quartic(z: Complex64, r: f64) -> [Complex64; 5] {
    let z2 = z * z;
    let c = |x: f64| Complex64::new(x, 0.0);
    [
        c(r),
        2.0 * (r * r + r - z2),
        r * (1.0 + 4.0 * r + r * r - z2),
        c(2.0 * r * r * (1.0 + r)),
        c(r * r * r),
    ]
}

/// Radius below which the density is computed from the deflated quartic.
const NEAR_ORIGIN: f64 = 0.05;

/// Weight of the atom at the origin of the symmetrized spectrum.
pub fn sym_zero_mode_weight(r: f64) -> f64 {
    (1.0 - 1.0 / r).max(0.0)
}

/// At `z = 0` the quartic has double roots `M = -1` and `M = -1/r`; the physical
/// one is `M0 = -1 + w0`. Writing `M = M0 + z K` and dividing by `z^2` leaves a
/// well-conditioned quartic in `K`, the continuous part of `G` near the origin.
/// Unavailable when `r` is close to 1, where the two double roots merge.
fn deflated_quartic(z: Complex64, r: f64) -> Option<[Complex64; 5]> {
    if (1.0 - r).abs() < 0.05 {
        return None;
    }
    let u = r - 1.0;
    let (c3, c1, c0) = if r < 1.0 {
        (-2.0 * r * r * u, 2.0 * u, 2.0 - r)
    } else {
        (2.0 * r * r * u, 0.0, 1.0 / r)
    };
    Some([
        Complex64::new(c0, 0.0),
        c1 * z,
        r * (u * u - z * z),
        c3 * z,
        r * r * r * z * z,
    ])
}

fn deflated_derivative(k: Complex64, z: Complex64, r: f64) -> Complex64 {
    let u = r - 1.0;
    let (c3, c1) = if r < 1.0 { (-2.0 * r * r * u, 2.0 * u) } else { (2.0 * r * r * u, 0.0) };
    let c4 = r * r * r;
    let q_z = 2.0 * c4 * z * k.powi(4) + c3 * k.powi(3) - 2.0 * r * z * k * k + c1 * k;
    let q_k = 4.0 * c4 * z * z * k.powi(3) + 3.0 * c3 * z * k * k + 2.0 * r * (u * u - z * z) * k + c1 * z;
    -q_z / q_k
}

fn horner(coeffs: &[Complex64], x: Complex64) -> (Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    coeffs.iter().rev().fold((zero, zero), |(p, dp), &c| (p * x + c, dp * x + p))
}

/// Newton iteration on a polynomial from a nearby guess.
fn newton_root(coeffs: &[Complex64], guess: Complex64) -> Result<Complex64> {
    let mut x = guess;
    for _ in 0..60 {
        let (p, dp) = horner(coeffs, x);
        if dp.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        x -= step;
        if step.norm() <= 1e-15 * (1.0 + x.norm()) {
            return Ok(x);
        }
    }
    Err(Error::BranchLost {
        candidates: vec![x],
        reason: "Newton tracking of the deflated root did not converge".into(),
    })
}

/// Physical root of the symmetrization quartic at `z` off the real axis, tracked
/// from `Re z + i Y` (where `M ~ r / (2 z^2)`) down to `Im z` by halving.
pub fn sym_moment_gf(z: Complex64, r: f64) -> Result<Complex64> {
    check_r(r)?;
    if z.im == 0.0 {
        return Err(Error::InvalidInput("sym_moment_gf needs Im z != 0".into()));
    }
    if z.im < 0.0 {
        return sym_moment_gf(z.conj(), r).map(|m| m.conj());
    }
    let x = z.re;
    let mut y = 10.0 * (1.0 + x.abs() + r);
    if y <= z.im {
        y = z.im;
    }
    let start = Complex64::new(x, y);
    let roots = solve_quartic_complex(&sym_quartic(start, r))?;
    let mut m = select_branch(&roots, &BranchSelector::Asymptotic { target: r / (2.0 * start * start) })?;
    let mut prev: Option<Complex64> = None;
    while y > z.im {
        let next_y = (0.5 * y).max(z.im);
        let zz = Complex64::new(x, next_y);
        let roots = solve_quartic_complex(&sym_quartic(zz, r))?;
        // linear predictor in y keeps the branch through near-collisions
        let guess = match prev {
            Some(p) => m + (m - p) * ((next_y - y) / y),
            None => m,
        };
        let picked = select_branch(&roots, &BranchSelector::Asymptotic { target: guess })?;
        prev = Some(m);
        m = picked;
        y = next_y;
    }
    let g = (m + 1.0) / z;
    if g.im > 1e-12 * (1.0 + g.norm()) {
        return Err(Error::BranchLost {
            candidates: solve_quartic_complex(&sym_quartic(z, r))?,
            reason: format!("tracked root gives Im G = {} > 0", g.im),
        });
    }
    Ok(m)
}

/// Continuous part `G(z) - w0 / z` of the symmetrized Green's function, `Im z != 0`.
pub fn sym_green_continuous(z: Complex64, r: f64) -> Result<Complex64> {
    check_r(r)?;
    if z.im < 0.0 {
        return sym_green_continuous(z.conj(), r).map(|g| g.conj());
    }
    let w0 = sym_zero_mode_weight(r);
    if z.norm() >= NEAR_ORIGIN || deflated_quartic(z, r).is_none() {
        let m = sym_moment_gf(z, r)?;
        return Ok((m + 1.0 - w0) / z);
    }
    deflated_track(z.re, z.im, r)
}

/// `K` at `x + i y_end` by Newton tracking from `x + i NEAR_ORIGIN`; `y_end` may be 0.
fn deflated_track(x: f64, y_end: f64, r: f64) -> Result<Complex64> {
    let w0 = sym_zero_mode_weight(r);
    let mut y = NEAR_ORIGIN;
    let z0 = Complex64::new(x, y);
    let mut k = (sym_moment_gf(z0, r)? + 1.0 - w0) / z0;
    let mut prev: Option<Complex64> = None;
    let floor = y_end.max(1e-12);
    while y > floor {
        let next_y = (0.5 * y).max(floor);
        let zz = Complex64::new(x, next_y);
        let guess = match prev {
            Some(p) => k + (k - p) * ((next_y - y) / y),
            None => k,
        };
        let coeffs = deflated_quartic(zz, r).expect("deflation available");
        prev = Some(k);
        k = newton_root(&coeffs, guess)?;
        y = next_y;
    }
    if y_end == 0.0 {
        let coeffs = deflated_quartic(Complex64::new(x, 0.0), r).expect("deflation available");
        k = newton_root(&coeffs, k)?;
    }
    Ok(k)
}

/// Continuous density of the symmetrized lagged matrix, `-Im G(lambda + i 0) / pi`
/// extracted at `eps = 1e-8` with Richardson extrapolation. Integrates to `1 - w0`.
pub fn sym_density(lambda: f64, r: f64) -> Result<f64> {
    boundary_density(|z| sym_green_continuous(z, r), lambda, DENSITY_EPS).map(|d| d.max(0.0))
}

/// Boundary value of the continuous Green's function and its `z` derivative at `lambda + i 0`.
fn sym_boundary_green(lambda: f64, r: f64) -> Result<(Complex64, Complex64)> {
    let z = Complex64::new(lambda, 0.0);
    if lambda.abs() < NEAR_ORIGIN && deflated_quartic(z, r).is_some() {
        let k = deflated_track(lambda, 0.0, r)?;
        return Ok((k, deflated_derivative(k, z, r)));
    }
    let approach = sym_moment_gf(Complex64::new(lambda, 1e-10 * (1.0 + lambda.abs())), r)?;
    let roots = solve_quartic_complex(&sym_quartic(z, r))?;
    let m = select_branch(&roots, &BranchSelector::Asymptotic { target: approach })?;
    let p_z = -2.0 * r * z * m * m - 4.0 * z * m;
    let p_m = 4.0 * r.powi(3) * m.powi(3)
        + 6.0 * r * r * (1.0 + r) * m * m
        + 2.0 * r * (1.0 + 4.0 * r + r * r - z * z) * m
        + 2.0 * (r * r + r - z * z);
    if p_m.norm() == 0.0 {
        return Err(Error::Singular(format!("quartic branch point at lambda = {lambda}")));
    }
    let dm = -p_z / p_m;
    let w0 = sym_zero_mode_weight(r);
    let g = (m + 1.0 - w0) / z;
    Ok((g, (dm * z - (m + 1.0 - w0)) / (z * z)))
}

/// `d rho_sym / d lambda` by implicit differentiation of the quartic.
pub fn sym_density_derivative(lambda: f64, r: f64) -> Result<f64> {
    let (_, dg) = sym_boundary_green(lambda, r)?;
    Ok(-dg.im / PI)
}

/// Cubic factor of the discriminant of the quartic in `M`, as a polynomial in `w = z^2`.
fn sym_discriminant_cubic(r: f64) -> Result<PolyReal> {
    let r2 = r * r;
    PolyReal::new(vec![
        r2 * r2 * r2 - 6.0 * r2 * r2 * r + 14.0 * r2 * r2 - 16.0 * r2 * r + 9.0 * r2 - 2.0 * r,
        -3.0 * r2 * r2 + 12.0 * r2 * r + 2.0 * r2 - 28.0 * r + 1.0,
        3.0 * r2 - 6.0 * r + 11.0,
        -1.0,
    ])
}

/// Discriminant of the symmetrization quartic in `M` at real `z`:
/// `-16 r^6 z^4 C(z^2)` with `C` the cubic factor.
pub fn sym_discriminant(z: f64, r: f64) -> Result<f64> {
    let w = z * z;
    let c = sym_discriminant_cubic(r)?.eval(Complex64::new(w, 0.0)).re;
    Ok(-16.0 * r.powi(6) * w * w * c)
}

/// Real roots of the derivative of `c0 + c1 w + c2 w^2 + c3 w^3`.
fn roots_of_derivative(c: &[f64]) -> Vec<f64> {
    let (a, b, k) = (3.0 * c[3], 2.0 * c[2], c[1]);
    let disc = b * b - 4.0 * a * k;
    if disc < 0.0 {
        return Vec::new();
    }
    // cancellation-free pair
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut out = vec![q / a];
    if q != 0.0 {
        out.push(k / q);
    }
    out
}

/// Upper support edge of the symmetrized density: the largest zero of the
/// discriminant with spectral mass just inside it (the others are collisions of
/// unphysical branches).
pub fn sym_support_edge(r: f64) -> Result<f64> {
    check_r(r)?;
    let cubic = sym_discriminant_cubic(r)?;
    let roots = solve_cubic(&cubic)?;
    // a double root (r = 1) is only good to sqrt(eps); it is a simple root of C'
    let c = cubic.coeffs();
    let slope_roots = roots_of_derivative(c);
    let mut candidates: Vec<f64> = roots
        .iter()
        .filter(|w| w.im == 0.0 && w.re > 0.0)
        .map(|w| {
            let near = slope_roots.iter().find(|&&d| (d - w.re).abs() <= 1e-6 * w.re.abs());
            near.copied().unwrap_or(w.re).sqrt()
        })
        .collect();
    candidates.sort_by(|a, b| b.total_cmp(a));
    for &edge in &candidates {
        if sym_density(edge * (1.0 - 1e-3), r)? > 1e-6 {
            return Ok(edge);
        }
    }
    Err(Error::BranchLost {
        candidates: roots,
        reason: "no discriminant zero bounds the support".into(),
    })
}

/// Radial marginal `rho_x(x) = 2 int_0^sqrt(R^2 - x^2) rho(sqrt(x^2 + u^2)) du` of a
/// rotationally symmetric density supported in `|z| <= outer`.
pub fn abel_forward<F: Fn(f64) -> f64>(rho: F, x: f64, outer: f64, tol: f64) -> Result<f64> {
    let x = x.abs();
    if x >= outer {
        return Ok(0.0);
    }
    let top = ((outer - x) * (outer + x)).sqrt();
    Ok(2.0 * tanh_sinh(|u| rho((x * x + u * u).sqrt()), 0.0, top, tol)?)
}

/// Inverse Abel transform from the derivative of the marginal:
/// `rho(s) = -(1/pi) int_0^sqrt(X^2 - s^2) rho_x'(sqrt(s^2 + u^2)) / sqrt(s^2 + u^2) du`.
/// The derivative is called as `drho_x(x, X - x)` so edge singularities stay resolved.
pub fn abel_inverse<F: Fn(f64, f64) -> f64>(drho_x: F, s: f64, outer: f64, tol: f64) -> Result<f64> {
    if s >= outer {
        return Ok(0.0);
    }
    let top = ((outer - s) * (outer + s)).sqrt();
    let integral = tanh_sinh_edges(
        |u, _, to_top| {
            let x = (s * s + u * u).sqrt();
            // X - x = (top - u)(top + u) / (X + x)
            let to_edge = to_top * (top + u) / (outer + x);
            drho_x(x, to_edge) / x
        },
        0.0,
        top,
        tol,
    )?;
    Ok(-integral / PI)
}

/// Rotationally symmetric density whose real-part marginal is the symmetrized
/// density; a faithful spectrum only for normal matrices.
#[derive(Debug, Clone, Copy)]
pub struct Abelization {
    pub r: f64,
    pub edge: f64,
    pub tol: f64,
}

impl Abelization {
    pub fn new(r: f64) -> Result<Self> {
        Ok(Self {
            r,
            edge: sym_support_edge(r)?,
            tol: 1e-9,
        })
    }

    /// Radial density; may be negative, and is reported as is.
    pub fn density(&self, s: f64) -> Result<f64> {
        let r = self.r;
        let first_error = std::cell::RefCell::new(None);
        let value = abel_inverse(
            |x, _| match sym_density_derivative(x, r) {
                Ok(v) => v,
                Err(e) => {
                    first_error.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            },
            s,
            self.edge,
            self.tol,
        );
        if let Some(e) = first_error.into_inner() {
            return Err(e);
        }
        value
    }
}
