//! Two-dimensional laws of the lagged matrix `C = X D X† / (T - tau)` with the
//! nilpotent shift `D`: unit lag, half lag (`T = 2 tau`), rational deep lag and
//! the outer spectral radius.
//!
//! All CDFs here follow [`ZeroModeConvention::LaggedMatrix`]: the value at the
//! inner edge is the fraction of exact zero eigenvalues of the `N x N` matrix.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qgreen::{shift_matrix, SandwichProblem};
use crate::quasi1d::{spectral_radii, RadialCurve, RingRegion, RingValue, SupportRing, ZeroModeConvention};
use crate::quaternion::Quaternion2;
use crate::roots::{fd_jacobian, newton_system, select_branch, solve_cubic, BranchSelector, NewtonOptions, PolyReal};

fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("rectangularity must be positive, got {r}")))
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Lag law with rational `beta = tau / T = p / q` in lowest terms; `p = 0` is the unit lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagLaw {
    pub r: f64,
    pub p: u64,
    pub q: u64,
}

/// Denominators above this make the reduced problem slow.
pub const LARGE_Q: u64 = 64;

impl LagLaw {
    pub fn new(r: f64, p: u64, q: u64) -> Result<Self> {
        check_r(r)?;
        if q == 0 || p >= q {
            return Err(Error::InvalidInput(format!("beta = {p}/{q} must lie in [0, 1)")));
        }
        let (p, q) = if p == 0 { (0, 1) } else { (p / gcd(p, q), q / gcd(p, q)) };
        Ok(Self { r, p, q })
    }

    pub fn unit(r: f64) -> Result<Self> {
        Self::new(r, 0, 1)
    }

    /// Best rational approximation of `beta` with denominator at most `max_q`
    /// (continued-fraction convergents).
    pub fn from_beta(r: f64, beta: f64, max_q: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta) || max_q == 0 {
            return Err(Error::InvalidInput(format!("beta = {beta} must lie in [0, 1)")));
        }
        let (mut h0, mut h1, mut k0, mut k1) = (0u64, 1u64, 1u64, 0u64);
        let mut x = beta;
        let mut best = (0u64, 1u64);
        for _ in 0..64 {
            let a = x.floor();
            let (h2, k2) = (a as u64 * h1 + h0, a as u64 * k1 + k0);
            if k2 > max_q {
                break;
            }
            best = (h2, k2);
            (h0, h1, k0, k1) = (h1, h2, k1, k2);
            let frac = x - a;
            if frac < 1e-12 {
                break;
            }
            x = 1.0 / frac;
        }
        Self::new(r, best.0, best.1.max(1))
    }

    pub fn beta(&self) -> f64 {
        self.p as f64 / self.q as f64
    }

    pub fn alpha(&self) -> f64 {
        1.0 / (1.0 - self.beta())
    }

    /// `ceil(1 / beta)`, `None` for the unit lag.
    pub fn m_ceil(&self) -> Option<u64> {
        (self.p > 0).then(|| self.q.div_ceil(self.p))
    }

    /// Fraction of zero eigenvalues, `max(1 - 1/(alpha r), 0)`: `D` has rank `T - tau`.
    pub fn zero_mode_weight(&self) -> f64 {
        (1.0 - 1.0 / (self.alpha() * self.r)).max(0.0)
    }

    /// `q x q` shift by `p`, so that `D = block ⊗ 1_{T/q}`.
    pub fn block(&self) -> Array2<Complex64> {
        shift_matrix(self.q as usize, self.p as usize, false)
    }

    /// The lagged problem reduced exactly to size `q`.
    pub fn reduced_problem(&self) -> Result<SandwichProblem> {
        if self.p == 0 {
            return Err(Error::InvalidInput("the unit lag has no finite reduction".into()));
        }
        SandwichProblem::new(self.block(), self.r, self.alpha() / self.q as f64)
    }
}

fn unit_poly(s: f64, r: f64) -> Result<PolyReal> {
    let u = 1.0 - r;
    let s2 = s * s;
    PolyReal::new(vec![-s2, r * (u * u - s2), 4.0 * r * r * u, 4.0 * r * r * r])
}

/// Radial CDF of the unit-lag spectrum from its cubic; clamps to the zero-mode
/// weight below the ring and to 1 above it.
pub fn unit_lag_cdf(s: f64, r: f64) -> Result<RingValue> {
    let ring = spectral_radii(r)?;
    let lo = ring.zero_mode_weight;
    let region = ring.region(s);
    let value = match region {
        RingRegion::BelowInner => lo,
        RingRegion::AboveOuter => 1.0,
        RingRegion::Inside => {
            let roots = solve_cubic(&unit_poly(s, r)?)?;
            select_branch(&roots, &BranchSelector::range(lo, 1.0, true)?)?.re
        }
    };
    Ok(RingValue { value, region })
}

/// `f'(s) / (2 pi s) = (1 + r f) / (pi dP/df)`.
pub fn unit_lag_density(s: f64, r: f64) -> Result<f64> {
    let f = unit_lag_cdf(s, r)?;
    if f.region != RingRegion::Inside {
        return Ok(0.0);
    }
    let (f, u) = (f.value, 1.0 - r);
    let dp_df = 12.0 * r.powi(3) * f * f + 8.0 * r * r * u * f + r * (u * u - s * s);
    let scale = 12.0 * r.powi(3) * f * f + 8.0 * r * r * (u * f).abs() + r * (u * u + s * s);
    if dp_df.abs() <= 1e-13 * scale {
        return Err(Error::Singular(format!("cubic derivative vanishes at s = {s}")));
    }
    Ok((1.0 + r * f) / (PI * dp_df))
}

/// `1 / (pi (2 f r^2 + r - r^2)) - f^2 / (pi s^2)` inside the ring, 0 outside.
pub fn unit_lag_overlap(s: f64, r: f64) -> Result<f64> {
    let f = unit_lag_cdf(s, r)?;
    match f.region {
        RingRegion::AboveOuter => Ok(0.0),
        RingRegion::BelowInner if r > 1.0 => Ok(0.0),
        _ if s == 0.0 => {
            if r < 1.0 {
                Ok(1.0 / (PI * r * (1.0 - r)))
            } else {
                Err(Error::Singular("overlap diverges at the origin for r = 1".into()))
            }
        }
        _ => {
            let f = f.value;
            Ok(1.0 / (PI * (2.0 * f * r * r + r - r * r)) - f * f / (PI * s * s))
        }
    }
}

fn curve(
    method: &str,
    r: f64,
    beta: f64,
    ring: SupportRing,
    grid: &[f64],
    mut point: impl FnMut(f64) -> Result<(f64, f64, f64)>,
) -> Result<RadialCurve> {
    let mut cdf = Vec::with_capacity(grid.len());
    let mut density = Vec::with_capacity(grid.len());
    let mut overlap = Vec::with_capacity(grid.len());
    for &s in grid {
        let (f, d, o) = point(s)?;
        cdf.push(f);
        density.push(d);
        overlap.push(o);
    }
    Ok(RadialCurve {
        method: method.into(),
        r,
        beta,
        convention: ZeroModeConvention::LaggedMatrix,
        ring,
        grid: grid.to_vec(),
        cdf,
        density,
        overlap,
    })
}

/// Unit-lag law on `grid`; the overlap is reported as infinite at `s = 0` for `r = 1`.
pub fn unit_lag_curve(r: f64, grid: &[f64]) -> Result<RadialCurve> {
    let ring = spectral_radii(r)?;
    curve("unit", r, 0.0, ring, grid, |s| {
        let o = match unit_lag_overlap(s, r) {
            Err(Error::Singular(_)) => f64::INFINITY,
            other => other?,
        };
        Ok((unit_lag_cdf(s, r)?.value, unit_lag_density(s, r)?, o))
    })
}

/// Half-lag (`T = 2 tau`) radial law at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfLagPoint {
    pub f: f64,
    pub density: f64,
    pub overlap: f64,
    pub inside: bool,
}

/// Closed forms for `T = 2 tau`; `s_ext = sqrt(2 r)`, no inner hole.
pub fn half_lag_laws(s: f64, r: f64) -> Result<HalfLagPoint> {
    check_r(r)?;
    if !(s >= 0.0) {
        return Err(Error::InvalidInput(format!("radius must be nonnegative, got {s}")));
    }
    if s >= (2.0 * r).sqrt() {
        return Ok(HalfLagPoint {
            f: 1.0,
            density: 0.0,
            overlap: 0.0,
            inside: false,
        });
    }
    let d = 2.0 * r - 1.0;
    let root = (d * d + 4.0 * s * s).sqrt();
    // root - |d| without cancellation
    let excess = 4.0 * s * s / (root + d.abs());
    let f = (d.max(0.0) * 2.0 + excess) / (4.0 * r);
    let density = 1.0 / (2.0 * PI * r * root);
    let overlap = if d < 0.0 {
        (4.0 / (root + d.abs()) - 2.0) / (8.0 * PI * r * r)
    } else if s == 0.0 {
        return Err(Error::Singular("overlap diverges at the origin for r >= 1/2".into()));
    } else {
        (2.0 * d - 2.0 * s * s + excess) / (8.0 * PI * r * r * s * s)
    };
    Ok(HalfLagPoint {
        f,
        density,
        overlap,
        inside: true,
    })
}

/// Half-lag law on `grid`.
pub fn half_lag_curve(r: f64, grid: &[f64]) -> Result<RadialCurve> {
    check_r(r)?;
    let ring = SupportRing {
        s_int: 0.0,
        s_ext: (2.0 * r).sqrt(),
        zero_mode_weight: (1.0 - 1.0 / (2.0 * r)).max(0.0),
    };
    curve("half", r, 0.5, ring, grid, |s| {
        if s == 0.0 && r >= 0.5 {
            // f(0) is the zero-mode weight; the density is finite, the overlap is not
            return Ok((ring.zero_mode_weight, 1.0 / (2.0 * PI * r * (2.0 * r - 1.0).max(f64::MIN_POSITIVE)), f64::INFINITY));
        }
        let p = half_lag_laws(s, r)?;
        let d = if ring.region(s) == RingRegion::Inside { p.density } else { 0.0 };
        Ok((p.f, d, p.overlap))
    })
}

/// Outer radius from `sum_{k=1}^{M-1} x^k (1 - k beta) = r` with `x = (alpha r / s)^2`.
pub fn deep_lag_radius(law: &LagLaw) -> Result<f64> {
    let r = law.r;
    let Some(m) = law.m_ceil() else {
        return Ok((r * (r + 1.0)).sqrt());
    };
    let beta = law.beta();
    let lhs = |x: f64| -> f64 {
        let mut acc = 0.0;
        let mut xk = 1.0;
        for k in 1..m {
            xk *= x;
            acc += xk * (1.0 - k as f64 * beta);
        }
        acc
    };
    let mut hi = 1.0;
    while lhs(hi) < r {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if lhs(mid) < r {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let x = 0.5 * (lo + hi);
    Ok(law.alpha() * r / x.sqrt())
}

/// Solution of the reduced lagged equations at radius `s`: `f = g s` and `u = |v|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeepLagPoint {
    pub s: f64,
    pub f: f64,
    pub u: f64,
    pub density: f64,
    pub inside: bool,
}

impl DeepLagPoint {
    pub fn overlap(&self) -> f64 {
        if self.inside {
            self.u / PI
        } else {
            0.0
        }
    }
}

/// `u` below this is treated as zero when dividing the `v` equation by `v`.
const U_FLOOR: f64 = 1e-300;

/// Two real equations in `(f, u)` at `w = 0`, `z = s`: the `(1, 1)` entry of
/// `(Q - Sigma) G - 1`, and the `(2, 1)` entry divided by `G_21 = i v`. The
/// gauge `G_12 = G_21 = i sqrt(u)` continues analytically to `u < 0`.
fn deep_residual(prob: &SandwichProblem, s: f64, f: f64, u: f64) -> Result<[f64; 2]> {
    let g = Complex64::new(f / s, 0.0);
    let u_eff = if u.abs() < U_FLOOR { U_FLOOR } else { u };
    let iv = Complex64::new(0.0, 1.0) * Complex64::new(u_eff, 0.0).sqrt();
    let gq = Quaternion2::new(g, iv, iv, g);
    let sigma = prob.self_energy(&gq)?;
    let z = Complex64::new(s, 0.0);
    let e1 = (z - sigma.m[0][0]) * g - sigma.m[0][1] * iv - 1.0;
    let e2 = z - sigma.m[1][1] - sigma.m[1][0] / iv * g;
    Ok([e1.re, e2.re])
}

fn newton_opts() -> NewtonOptions {
    NewtonOptions { tol: 1e-12, max_iter: 40 }
}

fn solve_fu(prob: &SandwichProblem, s: f64, seed: [f64; 2]) -> Result<[f64; 2]> {
    let x = newton_system(
        |x: &[f64]| deep_residual(prob, s, x[0], x[1]).map(|e| e.to_vec()),
        &seed,
        &newton_opts(),
    )?;
    Ok([x[0], x[1]])
}

/// `f'(s)` by implicit differentiation of the residual.
fn df_ds(prob: &SandwichProblem, s: f64, x: [f64; 2]) -> Result<f64> {
    let mut res = |y: &[f64]| deep_residual(prob, y[2], y[0], y[1]).map(|e| e.to_vec());
    let j = fd_jacobian(&mut res, &[x[0], x[1], s], 2)?;
    let det = j[[0, 0]] * j[[1, 1]] - j[[0, 1]] * j[[1, 0]];
    if det.abs() < 1e-300 {
        return Err(Error::Singular(format!("deep-lag Jacobian is singular at s = {s}")));
    }
    // first component of -J_x^{-1} J_s
    Ok(-(j[[1, 1]] * j[[0, 2]] - j[[0, 1]] * j[[1, 2]]) / det)
}

/// Radii below this fraction of `s_ext` are evaluated at that fraction.
pub const DEEP_LAG_MIN_RADIUS: f64 = 1e-2;

struct Sweep {
    points: Vec<DeepLagPoint>,
    s_int: Option<f64>,
}

/// Marches inward from `s_ext` (where `f = 1`, `u = 0`), visiting the targets in
/// descending order. A sign change of `u` marks the inner edge, which is
/// bisected; below it the solution is `f = zero_mode_weight`, `u = 0`.
fn march(law: &LagLaw, targets: &[f64]) -> Result<Sweep> {
    let prob = law.reduced_problem()?;
    let s_ext = deep_lag_radius(law)?;
    let w0 = law.zero_mode_weight();
    let s_min = DEEP_LAG_MIN_RADIUS * s_ext;
    let h_max = 0.02 * s_ext;
    let h_min = 1e-9 * s_ext;

    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| targets[b].total_cmp(&targets[a]));
    let mut points = vec![None; targets.len()];

    let (mut s, mut x) = (s_ext, [1.0, 0.0]);
    let mut prev: Option<(f64, [f64; 2])> = None;
    let mut h = h_max;
    let mut s_int = None;
    for idx in order {
        let target = targets[idx];
        if !(target >= 0.0) {
            return Err(Error::InvalidInput(format!("radius must be nonnegative, got {target}")));
        }
        if target >= s_ext {
            points[idx] = Some(DeepLagPoint { s: target, f: 1.0, u: 0.0, density: 0.0, inside: false });
            continue;
        }
        let goal = target.max(s_min);
        while s_int.is_none() && s > goal {
            let next = (s - h).max(goal);
            let seed = match prev {
                Some((sp, xp)) => {
                    let t = (next - s) / (s - sp);
                    [x[0] + t * (x[0] - xp[0]), x[1] + t * (x[1] - xp[1])]
                }
                None => x,
            };
            match solve_fu(&prob, next, seed) {
                Ok(y) if y[1] >= 0.0 => {
                    prev = Some((s, x));
                    (s, x) = (next, y);
                    h = (1.5 * h).min(h_max);
                }
                Ok(y) if h <= 1e-3 * h_max || (y[1] < 0.0 && (x[1] - y[1]).abs() < 0.5 * x[1].max(1e-3)) => {
                    // u crossed zero between next and s
                    s_int = Some(bisect_inner_edge(&prob, next, s, x)?);
                }
                _ => {
                    h *= 0.5;
                    if h < h_min {
                        return Err(Error::Continuation {
                            failed_w: next,
                            last_converged_w: Some(s),
                        });
                    }
                }
            }
        }
        let point = match s_int {
            Some(edge) if target <= edge => DeepLagPoint { s: target, f: w0, u: 0.0, density: 0.0, inside: false },
            _ => {
                let d = df_ds(&prob, s, x)? / (2.0 * PI * s);
                DeepLagPoint { s: target, f: x[0], u: x[1].max(0.0), density: d, inside: true }
            }
        };
        points[idx] = Some(point);
    }
    Ok(Sweep {
        points: points.into_iter().map(|p| p.expect("every target visited")).collect(),
        s_int,
    })
}

/// Bisects for the radius in `(lo, hi)` where the continued `u` reaches zero.
fn bisect_inner_edge(prob: &SandwichProblem, mut lo: f64, mut hi: f64, x_hi: [f64; 2]) -> Result<f64> {
    let mut seed = x_hi;
    for _ in 0..60 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let y = solve_fu(prob, mid, seed)?;
        if y[1] >= 0.0 {
            hi = mid;
            seed = y;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Deep-lag `(f, u)` at one radius; see [`deep_lag_curve`] for sweeps.
pub fn deep_lag_solve(law: &LagLaw, s: f64) -> Result<DeepLagPoint> {
    if law.p == 0 {
        let r = law.r;
        let f = unit_lag_cdf(s, r)?;
        let o = unit_lag_overlap(s, r)?;
        return Ok(DeepLagPoint {
            s,
            f: f.value,
            u: PI * o,
            density: unit_lag_density(s, r)?,
            inside: f.region == RingRegion::Inside,
        });
    }
    Ok(march(law, &[s])?.points[0])
}

/// Inner edge of the deep-lag spectrum, located where `u` reaches zero when
/// continuing inward; `None` if `u` stays positive down to
/// [`DEEP_LAG_MIN_RADIUS`]` * s_ext`.
pub fn deep_lag_inner_radius(law: &LagLaw) -> Result<Option<f64>> {
    if law.p == 0 {
        let ring = spectral_radii(law.r)?;
        return Ok((ring.s_int > 0.0).then_some(ring.s_int));
    }
    Ok(march(law, &[0.0])?.s_int)
}

/// Deep-lag law on `grid`.
pub fn deep_lag_curve(law: &LagLaw, grid: &[f64]) -> Result<RadialCurve> {
    if law.p == 0 {
        let mut c = unit_lag_curve(law.r, grid)?;
        c.method = "deep".into();
        return Ok(c);
    }
    let sweep = march(law, grid)?;
    let ring = SupportRing {
        s_int: sweep.s_int.unwrap_or(0.0),
        s_ext: deep_lag_radius(law)?,
        zero_mode_weight: law.zero_mode_weight(),
    };
    let mut it = sweep.points.into_iter();
    curve("deep", law.r, law.beta(), ring, grid, |s| {
        let p = it.next().expect("one point per radius");
        let d = if ring.region(s) == RingRegion::Inside { p.density } else { 0.0 };
        Ok((p.f, d, p.overlap()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qgreen::{solve_sandwich, ContinuationSchedule};
    use crate::quad::tanh_sinh;
    use crate::quasi1d::hl_radial_cdf;
    use proptest::prelude::*;

    #[test]
    fn law_reduction_and_parameters() {
        let law = LagLaw::new(0.5, 2, 6).unwrap();
        assert_eq!((law.p, law.q), (1, 3));
        assert!((law.alpha() - 1.5).abs() < 1e-15);
        assert_eq!(law.m_ceil(), Some(3));
        assert_eq!(LagLaw::new(0.5, 1, 2).unwrap().m_ceil(), Some(2));
        assert_eq!(LagLaw::unit(2.0).unwrap().m_ceil(), None);
        assert!(LagLaw::new(0.5, 3, 3).is_err());
        let approx = LagLaw::from_beta(1.0, 0.3333333, 50).unwrap();
        assert_eq!((approx.p, approx.q), (1, 3));
        let json = serde_json::to_string(&law).unwrap();
        assert_eq!(serde_json::from_str::<LagLaw>(&json).unwrap(), law);
    }

    #[test]
    fn unit_lag_examples() {
        let f = unit_lag_cdf(2f64.sqrt(), 1.0).unwrap();
        assert!((f.value - 1.0).abs() < 1e-12);
        let f = unit_lag_cdf(1.0 / 3f64.sqrt(), 1.0).unwrap();
        assert!((f.value - 0.5).abs() < 1e-12);
        let o = unit_lag_overlap(1.0 / 3f64.sqrt(), 1.0).unwrap();
        assert!((o - 1.0 / (4.0 * PI)).abs() < 1e-12);
        for r in [0.5, 1.0, 2.0] {
            let s_ext = spectral_radii(r).unwrap().s_ext;
            let f = 1.0;
            let at_edge = 1.0 / (PI * (2.0 * f * r * r + r - r * r)) - f * f / (PI * s_ext * s_ext);
            assert!(at_edge.abs() < 1e-15);
            assert_eq!(unit_lag_overlap(s_ext, r).unwrap(), 0.0);
            assert!(unit_lag_overlap(s_ext * (1.0 - 1e-9), r).unwrap().abs() < 1e-6);
        }
        // inner edge for r > 1 carries the zero-mode weight
        let ring = spectral_radii(2.0).unwrap();
        let f = unit_lag_cdf(ring.s_int * (1.0 + 1e-9), 2.0).unwrap();
        assert!((f.value - 0.5).abs() < 1e-4);
    }

    #[test]
    fn unit_lag_maps_onto_cyclic_product() {
        for r in [0.25, 0.5, 1.0, 2.0] {
            let ring = spectral_radii(r).unwrap();
            for k in 1..100 {
                let s = ring.s_int + (ring.s_ext - ring.s_int) * k as f64 / 100.0;
                let f = unit_lag_cdf(s, r).unwrap().value;
                let big_f = hl_radial_cdf(s, r).unwrap().value;
                assert!((big_f - (1.0 - r + f * r)).abs() < 1e-10, "r = {r}, s = {s}");
            }
        }
    }

    #[test]
    fn unit_lag_density_normalization() {
        for r in [0.5, 2.0] {
            let ring = spectral_radii(r).unwrap();
            let mass = tanh_sinh(|s| 2.0 * PI * s * unit_lag_density(s, r).unwrap(), ring.s_int, ring.s_ext, 1e-10).unwrap();
            assert!((mass - (1.0 - ring.zero_mode_weight)).abs() < 1e-8, "r = {r}: {mass}");
        }
    }

    #[test]
    fn half_lag_examples() {
        let p = half_lag_laws(0.0, 0.25).unwrap();
        assert!((p.density - 1.0 / (0.25 * PI)).abs() < 1e-14);
        assert_eq!(p.f, 0.0);
        let p = half_lag_laws(1.0, 0.5).unwrap();
        assert!(!p.inside && p.f == 1.0 && p.overlap == 0.0);
        let edge = half_lag_laws(1.0 - 1e-12, 0.5).unwrap();
        assert!((edge.f - 1.0).abs() < 1e-10 && edge.overlap.abs() < 1e-9);
        let p = half_lag_laws(2.0, 2.0).unwrap();
        assert!(!p.inside);
        let q = half_lag_laws(2f64.sqrt() * 0.999999, 0.7).unwrap();
        assert!((q.f - 1.0).abs() < 1e-5);
        // density is f'/(2 pi s)
        let (s, h, r) = (0.4, 1e-6, 0.8);
        let fd = (half_lag_laws(s + h, r).unwrap().f - half_lag_laws(s - h, r).unwrap().f) / (2.0 * h);
        assert!((fd / (2.0 * PI * s) - half_lag_laws(s, r).unwrap().density).abs() < 1e-8);
    }

    #[test]
    fn radius_examples() {
        let r = 0.5;
        let law = LagLaw::new(r, 1, 10000).unwrap();
        assert!((deep_lag_radius(&law).unwrap() - 0.75f64.sqrt()).abs() < 1e-3);
        for (p, q) in [(1, 2), (3, 5), (3, 4)] {
            let law = LagLaw::new(r, p, q).unwrap();
            let expected = (law.alpha() * r).sqrt();
            assert!((deep_lag_radius(&law).unwrap() - expected).abs() < 1e-12);
        }
        assert!((deep_lag_radius(&LagLaw::unit(2.0).unwrap()).unwrap() - 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn deep_lag_half_matches_closed_form() {
        for r in [0.25, 0.5, 2.0] {
            let law = LagLaw::new(r, 1, 2).unwrap();
            let s_ext = (2.0 * r).sqrt();
            let grid: Vec<f64> = (1..10).map(|k| s_ext * k as f64 / 10.0).collect();
            let c = deep_lag_curve(&law, &grid).unwrap();
            for (i, &s) in grid.iter().enumerate() {
                let exact = half_lag_laws(s, r).unwrap();
                assert!((c.cdf[i] - exact.f).abs() < 1e-10, "r = {r}, s = {s}: {} vs {}", c.cdf[i], exact.f);
                assert!((c.overlap[i] - exact.overlap).abs() < 1e-8 * (1.0 + exact.overlap));
                assert!((c.density[i] - exact.density).abs() < 1e-6 * (1.0 + exact.density));
            }
        }
    }

    #[test]
    fn deep_lag_small_beta_and_origin() {
        // a small beta approaches the unit-lag law
        let law = LagLaw::new(0.5, 1, 40).unwrap();
        for s in [0.3, 0.6, 0.9] {
            let f = deep_lag_solve(&law, s).unwrap().f;
            assert!((f - unit_lag_cdf(s, 0.5).unwrap().value).abs() < 0.01, "s = {s}");
        }
        // for beta > 0 and r > 1, u stays positive down to the origin, where f
        // tends to the zero-mode weight: no inner hole
        let law = LagLaw::new(2.0, 1, 10).unwrap();
        assert_eq!(deep_lag_inner_radius(&law).unwrap(), None);
        let p = deep_lag_solve(&law, 0.0).unwrap();
        assert!(p.inside && (p.f - law.zero_mode_weight()).abs() < 1e-3, "{p:?}");
    }

    #[test]
    fn deep_lag_matches_reduced_sandwich() {
        let law = LagLaw::new(0.5, 1, 3).unwrap();
        let prob = law.reduced_problem().unwrap();
        let sched = ContinuationSchedule::default();
        for s in [0.3, 0.7, 1.0] {
            let p = deep_lag_solve(&law, s).unwrap();
            let sol = solve_sandwich(&prob, Complex64::new(s, 0.0), &sched).unwrap();
            assert!(((sol.g * s).re - p.f).abs() < 1e-6, "s = {s}");
            assert!((sol.v_abs * sol.v_abs - p.u).abs() < 1e-5);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn radius_is_universal_for_long_lags(beta in 0.5..0.99f64, r in 0.1..5.0f64) {
            let law = LagLaw::from_beta(r, beta, 1000).unwrap();
            let s = deep_lag_radius(&law).unwrap();
            prop_assert!((s - (law.alpha() * r).sqrt()).abs() < 1e-10);
        }

        #[test]
        fn unit_cdf_monotone(r in 0.1..4.0f64, a in 0.0..1.0f64, b in 0.0..1.0f64) {
            let ring = spectral_radii(r).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let s = |t: f64| ring.s_int + t * (ring.s_ext - ring.s_int);
            let (fl, fh) = (unit_lag_cdf(s(lo), r).unwrap().value, unit_lag_cdf(s(hi), r).unwrap().value);
            prop_assert!(fl <= fh + 1e-12);
            prop_assert!(fl >= ring.zero_mode_weight - 1e-12 && fh <= 1.0 + 1e-12);
        }
    }
}
