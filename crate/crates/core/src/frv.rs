//! Free-probability transforms of the Wishart and anti-Wishart ensembles and
//! the two projector examples (free sum and free product).
//!
//! Conventions, for a spectral measure `rho`:
//! `G(z) = <1/(z - x)>`, `M(z) = z G(z) - 1`, `B = G^{-1}` (functional inverse),
//! `R(z) = B(z) - 1/z`, `N = M^{-1}` and `S(z) = (1 + z) / (z N(z))`.
//! Every Green's function here is a product of principal square roots arranged
//! so that `G(z) ~ 1/z` at infinity with the cut on the support.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad::{tanh_sinh, tanh_sinh_edges};

/// Default offset from the real axis for boundary-value density extraction.
pub const DENSITY_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    Green,
    R,
    S,
    N,
    Blue,
    Moment,
}

/// A transform value together with the argument it was evaluated at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformEval {
    pub kind: TransformKind,
    pub argument: Complex64,
    pub value: Complex64,
}

impl TransformEval {
    pub fn wishart(kind: TransformKind, z: Complex64, r: f64) -> Result<Self> {
        Ok(Self {
            kind,
            argument: z,
            value: wishart_transforms(kind, z, r)?,
        })
    }

    pub fn antiwishart(kind: TransformKind, z: Complex64, r: f64) -> Result<Self> {
        Ok(Self {
            kind,
            argument: z,
            value: antiwishart_transforms(kind, z, r)?,
        })
    }
}

fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("rectangularity must be positive, got {r}")))
    }
}

fn pole(what: &'static str, at: Complex64) -> Error {
    Error::Pole { what, at }
}

fn near(z: Complex64, p: f64) -> bool {
    (z - p).norm() <= 1e-15 * (1.0 + p.abs())
}

/// Transforms of the Wishart law of `X X† / T` with `r = N / T`.
pub fn wishart_transforms(kind: TransformKind, z: Complex64, r: f64) -> Result<Complex64> {
    check_r(r)?;
    let one = Complex64::new(1.0, 0.0);
    match kind {
        TransformKind::R => {
            if near(z, 1.0 / r) {
                return Err(pole("R_W", z));
            }
            Ok(one / (one - r * z))
        }
        TransformKind::S => {
            if near(z, -1.0 / r) {
                return Err(pole("S_W", z));
            }
            Ok(one / (one + r * z))
        }
        TransformKind::N => {
            if near(z, 0.0) {
                return Err(pole("N_W", z));
            }
            Ok((one + z) * (one + r * z) / z)
        }
        TransformKind::Blue => {
            if near(z, 0.0) || near(z, 1.0 / r) {
                return Err(pole("B_W", z));
            }
            Ok(one / (one - r * z) + one / z)
        }
        TransformKind::Green => wishart_green(z, r),
        TransformKind::Moment => {
            if near(z, 0.0) {
                return Ok(Complex64::new(-1.0, 0.0));
            }
            Ok(z * wishart_green(z, r)? - one)
        }
    }
}

fn wishart_green(z: Complex64, r: f64) -> Result<Complex64> {
    if near(z, 0.0) {
        // removable for r < 1, zero-mode pole for r >= 1
        return if r < 1.0 {
            Ok(Complex64::new(-1.0 / (1.0 - r), 0.0))
        } else {
            Err(pole("G_W", z))
        };
    }
    let lm = (1.0 - r.sqrt()).powi(2);
    let lp = (1.0 + r.sqrt()).powi(2);
    let root = (z - lm).sqrt() * (z - lp).sqrt();
    Ok((z - 1.0 + r - root) / (2.0 * r * z))
}

/// Transforms of the anti-Wishart law of `X† X / N` with `r = N / T`.
pub fn antiwishart_transforms(kind: TransformKind, z: Complex64, r: f64) -> Result<Complex64> {
    check_r(r)?;
    let one = Complex64::new(1.0, 0.0);
    match kind {
        TransformKind::R => {
            if near(z, r) {
                return Err(pole("R_aW", z));
            }
            Ok(r / (r - z))
        }
        TransformKind::S => {
            if near(z, -r) {
                return Err(pole("S_aW", z));
            }
            Ok(r / (r + z))
        }
        TransformKind::N => {
            if near(z, 0.0) {
                return Err(pole("N_aW", z));
            }
            Ok((one + z) * (r + z) / (r * z))
        }
        TransformKind::Blue => {
            if near(z, 0.0) || near(z, r) {
                return Err(pole("B_aW", z));
            }
            Ok(r / (r - z) + one / z)
        }
        TransformKind::Green => antiwishart_green(z, r),
        TransformKind::Moment => {
            if near(z, 0.0) {
                return Ok(Complex64::new(-1.0, 0.0));
            }
            Ok(z * antiwishart_green(z, r)? - one)
        }
    }
}

fn antiwishart_green(z: Complex64, r: f64) -> Result<Complex64> {
    if near(z, 0.0) {
        return if r > 1.0 {
            Ok(Complex64::new(-r / (r - 1.0), 0.0))
        } else {
            Err(pole("G_aW", z))
        };
    }
    let lm = (1.0 - r.sqrt()).powi(2) / r;
    let lp = (1.0 + r.sqrt()).powi(2) / r;
    let root = (z - lm).sqrt() * (z - lp).sqrt();
    Ok((r * z - r + 1.0 - r * root) / (2.0 * z))
}

/// Green's function of the free sum of two projectors of trace 1/2 with
/// spectrum `{-1/2, 1/2}` each (a symmetric arcsine law on `[-1, 1]`).
pub fn free_add_projectors(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && z.re.abs() <= 1.0 {
        return Err(Error::InvalidInput(format!(
            "z = {z} lies on the cut [-1, 1]; evaluate at lambda +/- i eps"
        )));
    }
    Ok(1.0 / ((z - 1.0).sqrt() * (z + 1.0).sqrt()))
}

/// Arcsine density on `(-1, 1)`, normalized to unit mass.
pub fn arcsine_density(lambda: f64) -> f64 {
    if lambda.abs() >= 1.0 {
        0.0
    } else {
        1.0 / (PI * (1.0 - lambda * lambda).sqrt())
    }
}

/// Upper edge `4 alpha (1 - alpha)` of the continuous part of the free Jacobi law.
pub fn jacobi_upper_edge(alpha: f64) -> f64 {
    4.0 * alpha * (1.0 - alpha)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Moment generating function `M(z)` of the product of two free projectors of
/// trace `alpha`, the root of `(z-1) M^2 + (z - 2 alpha) M - alpha^2 = 0` with `M ~ alpha^2 / z`.
pub fn free_multiply_projectors(alpha: f64, z: Complex64) -> Result<Complex64> {
    check_alpha(alpha)?;
    if near(z, 1.0) {
        return if alpha < 0.5 {
            Ok(Complex64::new(alpha * alpha / (1.0 - 2.0 * alpha), 0.0))
        } else {
            Err(pole("free Jacobi M", z))
        };
    }
    let edge = jacobi_upper_edge(alpha);
    let root = z.sqrt() * (z - edge).sqrt();
    let m = (2.0 * alpha - z + root) / (2.0 * (z - 1.0));
    let residual = (z - 1.0) * m * m + (z - 2.0 * alpha) * m - alpha * alpha;
    let scale = 1.0 + z.norm() * (1.0 + m.norm()) * (1.0 + m.norm());
    if residual.norm() > 1e-10 * scale {
        return Err(Error::BranchLost {
            candidates: vec![m],
            reason: format!("quadratic residual {:e}", residual.norm()),
        });
    }
    Ok(m)
}

/// Moment generating function of the squared whitened lagged matrix, the free
/// Jacobi law with `alpha = r`.
pub fn whitened_lag_moment_gf(z: Complex64, r: f64) -> Result<Complex64> {
    free_multiply_projectors(r, z)
}

/// Continuous density as `f(x, x - lo, hi - x)`; the edge distances keep
/// endpoint singularities accurate.
pub type DensityFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Spectral measure built from point masses and an optional continuous part.
#[derive(Clone)]
pub struct AtomicMeasure {
    pub atoms: Vec<(f64, f64)>,
    pub support: Option<(f64, f64)>,
    density: Option<DensityFn>,
}

impl fmt::Debug for AtomicMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AtomicMeasure")
            .field("atoms", &self.atoms)
            .field("support", &self.support)
            .finish_non_exhaustive()
    }
}

impl AtomicMeasure {
    pub fn new(
        atoms: Vec<(f64, f64)>,
        continuous: Option<((f64, f64), DensityFn)>,
    ) -> Result<Self> {
        if atoms.iter().any(|&(_, w)| !(w >= 0.0)) {
            return Err(Error::InvalidInput("atom weights must be nonnegative".into()));
        }
        let (support, density) = match continuous {
            Some(((lo, hi), d)) => {
                if !(lo < hi) {
                    return Err(Error::InvalidInput(format!("empty support [{lo}, {hi}]")));
                }
                (Some((lo, hi)), Some(d))
            }
            None => (None, None),
        };
        Ok(Self {
            atoms,
            support,
            density,
        })
    }

    /// Continuous density; zero outside the support.
    pub fn density(&self, x: f64) -> f64 {
        match (&self.density, self.support) {
            (Some(d), Some((lo, hi))) if x > lo && x < hi => d(x, x - lo, hi - x),
            _ => 0.0,
        }
    }

    pub fn atom_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn continuous_mass(&self, tol: f64) -> Result<f64> {
        self.continuous_moment(0, tol)
    }

    pub fn continuous_moment(&self, k: i32, tol: f64) -> Result<f64> {
        match (&self.density, self.support) {
            (Some(d), Some((lo, hi))) => tanh_sinh_edges(|x, a, b| x.powi(k) * d(x, a, b), lo, hi, tol),
            _ => Ok(0.0),
        }
    }

    pub fn total_mass(&self, tol: f64) -> Result<f64> {
        Ok(self.atom_mass() + self.continuous_mass(tol)?)
    }

    /// Cumulative distribution function including atoms at or below `x`.
    pub fn cdf(&self, x: f64, tol: f64) -> Result<f64> {
        let atoms: f64 = self.atoms.iter().filter(|a| a.0 <= x).map(|a| a.1).sum();
        let cont = match self.support {
            Some((lo, hi)) if x > lo => tanh_sinh(|t| self.density(t), lo, x.min(hi), tol)?,
            _ => 0.0,
        };
        Ok(atoms + cont)
    }
}

/// Free Jacobi law of two free projectors of trace `alpha`: atoms `1 - alpha` at 0
/// and `max(2 alpha - 1, 0)` at 1 plus a continuous part on `[0, 4 alpha (1 - alpha)]`.
pub fn free_jacobi_measure(alpha: f64) -> Result<AtomicMeasure> {
    check_alpha(alpha)?;
    let edge = jacobi_upper_edge(alpha);
    let mut atoms = vec![(0.0, 1.0 - alpha)];
    if alpha > 0.5 {
        atoms.push((1.0, 2.0 * alpha - 1.0));
    }
    let density = move |x: f64, _: f64, to_edge: f64| {
        to_edge.sqrt() / (2.0 * PI * x.sqrt() * (1.0 - edge + to_edge))
    };
    AtomicMeasure::new(atoms, Some(((0.0, edge), Arc::new(density))))
}

/// `-Im G(lambda + i eps) / pi`, Richardson-extrapolated to `eps -> 0` from `eps` and `2 eps`.
pub fn boundary_density<F>(mut green: F, lambda: f64, eps: f64) -> Result<f64>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    let at = |g: Complex64| -g.im / PI;
    let d1 = at(green(Complex64::new(lambda, eps))?);
    let d2 = at(green(Complex64::new(lambda, 2.0 * eps))?);
    Ok(2.0 * d1 - d2)
}
