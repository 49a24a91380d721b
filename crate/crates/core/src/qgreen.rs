//! Quaternionic Green's function of `Y = (1/T) X A X†` for Gaussian `X` and an
//! arbitrary `T x T` matrix `A`.
//!
//! The self-consistency condition is `[Q - Sigma(G)] G = 1` with
//! `Sigma(G) = (1/T) bTr( Acal [1 - r (G ⊗ 1) Acal]^{-1} )` and
//! `Acal = diag(A_eff, A_eff†)`. It is solved for the regularized argument
//! `Q = (z, i w; i w, z̄)` along a decreasing sequence of `w`, which selects the
//! non-holomorphic solution inside the spectrum.

use std::f64::consts::PI;

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Inverse, Solve};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quaternion::Quaternion2;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
/// Residual at which the damped iteration hands over to Newton.
const FIXED_POINT_TARGET: f64 = 1e-3;

fn dagger(a: &Array2<Complex64>) -> Array2<Complex64> {
    a.t().mapv(|x| x.conj())
}

fn identity(t: usize) -> Array2<Complex64> {
    Array2::from_diag_elem(t, ONE)
}

/// `Tr(X Y)` without forming the product.
fn trace_of_product(x: &Array2<Complex64>, y: &Array2<Complex64>) -> Complex64 {
    x.iter().zip(y.t().iter()).map(|(a, b)| a * b).sum()
}

/// `(1/T) bTr( Acal [1 - c (G ⊗ 1) Acal]^{-1} )` with `Acal = diag(A, A†)`.
///
/// Uses the Schur complement of the upper-left block (two `T x T` inversions);
/// falls back to a dense `2T x 2T` inversion when that block is singular.
pub fn block_trace_resolvent(a: &Array2<Complex64>, g: &Quaternion2, coupling: f64) -> Result<Quaternion2> {
    let t = a.nrows();
    if a.ncols() != t || t == 0 {
        return Err(Error::InvalidInput("A must be square and nonempty".into()));
    }
    let [[g11, g12], [g21, g22]] = g.m;
    let c = coupling;
    let eye = identity(t);
    let ah = dagger(a);
    let k11 = &eye - &a.mapv(|x| x * c * g11);
    let p = match k11.inv() {
        Ok(p) => p,
        Err(_) => return block_trace_resolvent_dense(a, g, coupling),
    };
    let w = a.dot(&p);
    let v = w.dot(&ah);
    let bc = g12 * g21 * c * c;
    let schur = &eye - &ah.mapv(|x| x * c * g22) - &v.mapv(|x| x * bc);
    let x22 = match schur.inv() {
        Ok(x) => x,
        Err(_) => return block_trace_resolvent_dense(a, g, coupling),
    };
    let zmat = x22.dot(&w);
    let tvx = trace_of_product(&v, &x22);
    let t11 = w.diag().sum() + bc * trace_of_product(&v, &zmat);
    let t22 = trace_of_product(&ah, &x22);
    let inv_t = 1.0 / t as f64;
    let out = Quaternion2::new(t11, tvx * c * g12, tvx * c * g21, t22).scale(Complex64::new(inv_t, 0.0));
    if out.to_array().iter().any(|x| !(x.re.is_finite() && x.im.is_finite())) {
        return Err(Error::Singular("block resolvent is not finite".into()));
    }
    Ok(out)
}

/// Reference implementation with an explicit `2T x 2T` inverse.
pub fn block_trace_resolvent_dense(
    a: &Array2<Complex64>,
    g: &Quaternion2,
    coupling: f64,
) -> Result<Quaternion2> {
    let t = a.nrows();
    let ah = dagger(a);
    let mut k = identity(2 * t);
    for (bi, bj) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)] {
        let src = if bj == 0 { a } else { &ah };
        let gij = g.m[bi][bj] * coupling;
        let mut block = k.slice_mut(s![bi * t..(bi + 1) * t, bj * t..(bj + 1) * t]);
        block.zip_mut_with(src, |kk, &x| *kk -= gij * x);
    }
    let kinv = k
        .inv()
        .map_err(|e| Error::Singular(format!("2T x 2T resolvent: {e}")))?;
    let mut out = [[ZERO; 2]; 2];
    for (bi, row) in out.iter_mut().enumerate() {
        let src = if bi == 0 { a } else { &ah };
        for (bj, slot) in row.iter_mut().enumerate() {
            let block = kinv.slice(s![bi * t..(bi + 1) * t, bj * t..(bj + 1) * t]).to_owned();
            *slot = trace_of_product(src, &block) / t as f64;
        }
    }
    Ok(Quaternion2 { m: out })
}

/// Quaternionic moment generating function `M(Q) = (1/T) bTr(Acal [1 - (Q ⊗ 1) Acal]^{-1})`.
pub fn quaternionic_moment_gf(a: &Array2<Complex64>, q: &Quaternion2) -> Result<Quaternion2> {
    block_trace_resolvent(a, q, 1.0)
}

/// Coefficient of `q11^k0 q12^k1 q21^k2 q22^k3` in the `component` entry of `M(Q)`,
/// the four entries of `Q` treated as independent variables. Extracted by a
/// `points^4` torus average (multivariate Cauchy formula) at radius `0.1 / max(1, |A|_F)`.
pub fn moment_coefficient(
    a: &Array2<Complex64>,
    component: (usize, usize),
    exponents: [usize; 4],
    points: usize,
) -> Result<Complex64> {
    if component.0 > 1 || component.1 > 1 {
        return Err(Error::InvalidInput("component indices are 0 or 1".into()));
    }
    if exponents.iter().any(|&k| k >= points) {
        return Err(Error::InvalidInput("need more torus points than the largest exponent".into()));
    }
    let norm = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let rho = 0.1 / norm.max(1.0);
    let phase = |j: usize| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / points as f64);
    let mut acc = ZERO;
    for j0 in 0..points {
        for j1 in 0..points {
            for j2 in 0..points {
                for j3 in 0..points {
                    let js = [j0, j1, j2, j3];
                    let q = Quaternion2::from_array(js.map(|j| phase(j) * rho));
                    let m = quaternionic_moment_gf(a, &q)?.m[component.0][component.1];
                    let mut weight = ONE;
                    for (&j, &k) in js.iter().zip(exponents.iter()) {
                        weight *= phase((j * k) % points).conj();
                    }
                    acc += m * weight;
                }
            }
        }
    }
    let total: usize = exponents.iter().sum();
    Ok(acc / (points as f64).powi(4) / rho.powi(total as i32))
}

/// `Y = scale * X A X†` with `X` of size `r T x T`; solved through `A_eff = scale T A`.
#[derive(Debug, Clone)]
pub struct SandwichProblem {
    pub a: Array2<Complex64>,
    pub r: f64,
    pub scale: f64,
    a_eff: Array2<Complex64>,
}

impl SandwichProblem {
    pub fn new(a: Array2<Complex64>, r: f64, scale: f64) -> Result<Self> {
        let t = a.nrows();
        if t == 0 || a.ncols() != t {
            return Err(Error::InvalidInput("A must be square with T >= 1".into()));
        }
        if !(r > 0.0) || !(scale > 0.0) {
            return Err(Error::InvalidInput("r and scale must be positive".into()));
        }
        let a_eff = a.mapv(|x| x * scale * t as f64);
        Ok(Self { a, r, scale, a_eff })
    }

    /// Wishart `X X† / T`.
    pub fn wishart(t: usize, r: f64) -> Result<Self> {
        Self::new(identity(t), r, 1.0 / t as f64)
    }

    /// Lagged matrix `X D X† / (T - tau)` with the nilpotent shift `D_{t, t+tau} = 1`.
    pub fn lagged(t: usize, tau: usize, r: f64) -> Result<Self> {
        if tau >= t {
            return Err(Error::InvalidInput("tau must be below T".into()));
        }
        Self::new(shift_matrix(t, tau, false), r, 1.0 / (t - tau) as f64)
    }

    /// Cyclic variant `X D X† / T` with `D_{t, (t+tau) mod T} = 1`.
    pub fn cyclic(t: usize, tau: usize, r: f64) -> Result<Self> {
        Self::new(shift_matrix(t, tau, true), r, 1.0 / t as f64)
    }

    pub fn t(&self) -> usize {
        self.a.nrows()
    }

    pub fn effective_matrix(&self) -> &Array2<Complex64> {
        &self.a_eff
    }

    pub fn self_energy(&self, g: &Quaternion2) -> Result<Quaternion2> {
        block_trace_resolvent(&self.a_eff, g, self.r)
    }

    /// `(Q - Sigma(G)) G - 1`.
    pub fn residual(&self, q: &Quaternion2, g: &Quaternion2) -> Result<Quaternion2> {
        Ok((*q - self.self_energy(g)?) * *g - Quaternion2::identity())
    }
}

/// `T x T` shift with ones at `(t, t + tau)`, wrapping around when `cyclic`.
pub fn shift_matrix(t: usize, tau: usize, cyclic: bool) -> Array2<Complex64> {
    let mut d = Array2::zeros((t, t));
    for i in 0..t {
        let j = i + tau;
        if j < t {
            d[[i, j]] = ONE;
        } else if cyclic {
            d[[i, j % t]] = ONE;
        }
    }
    d
}

/// Decreasing regularization values for the `w -> 0` continuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSchedule {
    pub w_values: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl ContinuationSchedule {
    pub fn new(w_values: Vec<f64>, tol: f64, max_iter: usize) -> Result<Self> {
        if w_values.is_empty() || w_values.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidInput("w values must be positive".into()));
        }
        if w_values.windows(2).any(|p| !(p[1] < p[0])) {
            return Err(Error::InvalidInput("w values must be strictly decreasing".into()));
        }
        if *w_values.last().unwrap() > 1e-6 {
            return Err(Error::InvalidInput("last w must be at most 1e-6".into()));
        }
        Ok(Self { w_values, tol, max_iter })
    }

    /// `w_start * ratio^k` down to the first value `<= w_end`.
    pub fn geometric(w_start: f64, w_end: f64, ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) || !(w_end > 0.0) || !(w_start > w_end) {
            return Err(Error::InvalidInput("need w_start > w_end > 0 and ratio in (0, 1)".into()));
        }
        let mut w = vec![w_start];
        while *w.last().unwrap() > w_end {
            let next = w.last().unwrap() * ratio;
            w.push(next);
        }
        Self::new(w, 1e-11, 60)
    }

    pub fn final_w(&self) -> f64 {
        *self.w_values.last().unwrap()
    }
}

impl Default for ContinuationSchedule {
    fn default() -> Self {
        Self::geometric(1e-1, 1e-7, 0.5).expect("valid default schedule")
    }
}

/// Converged quaternionic Green's function at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichSolution {
    pub z: Complex64,
    pub w: f64,
    pub value: Quaternion2,
    pub g: Complex64,
    /// `|v|`; the phase of `v` is a gauge choice.
    pub v_abs: f64,
    pub residual: f64,
    /// `|v| > 10 w`: `|v|` stays finite as `w -> 0` only inside the spectrum.
    pub inside: bool,
}

impl SandwichSolution {
    fn from_value(z: Complex64, w: f64, value: Quaternion2, residual: f64) -> Self {
        let v_abs = value.v().norm();
        Self {
            z,
            w,
            value,
            g: value.g(),
            v_abs,
            residual,
            inside: v_abs > 10.0 * w,
        }
    }

    /// Eigenvector overlap `|v|^2 / pi`.
    pub fn overlap(&self) -> f64 {
        overlap_from_field(self.v_abs)
    }
}

fn residual_norm(r: &Quaternion2) -> f64 {
    r.max_abs()
}

/// Newton's method on the four complex entries of `G` (the equation is
/// holomorphic in them), Jacobian by forward differences, with step halving.
fn newton_at(
    prob: &SandwichProblem,
    q: &Quaternion2,
    seed: Quaternion2,
    tol: f64,
    max_iter: usize,
) -> Result<(Quaternion2, f64)> {
    let mut g = seed;
    let mut f = prob.residual(q, &g)?;
    let mut norm = residual_norm(&f);
    for iter in 0..max_iter {
        if norm <= tol {
            return Ok((g, norm));
        }
        let x = g.to_array();
        let fx = f.to_array();
        let mut jac = Array2::<Complex64>::zeros((4, 4));
        for k in 0..4 {
            let h = 1e-7 * (1.0 + x[k].norm());
            let mut xp = x;
            xp[k] += h;
            let fp = prob.residual(q, &Quaternion2::from_array(xp))?.to_array();
            for i in 0..4 {
                jac[[i, k]] = (fp[i] - fx[i]) / h;
            }
        }
        let rhs = Array1::from_iter(fx.iter().map(|v| -v));
        let step = jac.solve_into(rhs).map_err(|_| Error::NonConvergence {
            iterations: iter,
            residual: norm,
            last: x.iter().flat_map(|c| [c.re, c.im]).collect(),
        })?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let trial = Quaternion2::from_array([
                x[0] + step[0] * lambda,
                x[1] + step[1] * lambda,
                x[2] + step[2] * lambda,
                x[3] + step[3] * lambda,
            ]);
            if let Ok(ft) = prob.residual(q, &trial) {
                let tn = residual_norm(&ft);
                if tn.is_finite() && tn < norm {
                    g = trial;
                    f = ft;
                    norm = tn;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if norm <= tol {
        Ok((g, norm))
    } else {
        Err(Error::NonConvergence {
            iterations: max_iter,
            residual: norm,
            last: g.to_array().iter().flat_map(|c| [c.re, c.im]).collect(),
        })
    }
}

/// Damped fixed-point iteration `G <- (G + [Q - Sigma(G)]^{-1}) / 2` until the
/// residual drops below `target`; returns the last iterate either way.
fn damped_fixed_point(
    prob: &SandwichProblem,
    q: &Quaternion2,
    seed: Quaternion2,
    target: f64,
    max_iter: usize,
) -> Result<Quaternion2> {
    let half = Complex64::new(0.5, 0.0);
    let mut g = seed;
    for _ in 0..max_iter {
        if residual_norm(&prob.residual(q, &g)?) < target {
            break;
        }
        let next = (*q - prob.self_energy(&g)?).inv()?;
        g = (g + next).scale(half);
    }
    Ok(g)
}

/// Fixed-point phase down to residual `1e-3`, then Newton polish.
fn solve_at(
    prob: &SandwichProblem,
    q: &Quaternion2,
    seed: Quaternion2,
    tol: f64,
    max_iter: usize,
) -> Result<(Quaternion2, f64)> {
    let g = damped_fixed_point(prob, q, seed, FIXED_POINT_TARGET, 10 * max_iter)?;
    newton_at(prob, q, g, tol, max_iter)
}

/// Solves at a single `(z, w)` starting from `seed` (typically a neighbouring solution):
/// Newton first, the fixed-point phase only if that fails.
pub fn solve_sandwich_seeded(
    prob: &SandwichProblem,
    z: Complex64,
    w: f64,
    seed: &Quaternion2,
    tol: f64,
    max_iter: usize,
) -> Result<SandwichSolution> {
    let q = Quaternion2::argument(z, Complex64::new(w, 0.0));
    let (g, res) = match newton_at(prob, &q, *seed, tol, max_iter) {
        Ok(sol) => sol,
        Err(_) => solve_at(prob, &q, *seed, tol, max_iter)?,
    };
    Ok(SandwichSolution::from_value(z, w, g, res))
}

/// Full `w -> 0` continuation at `z`, starting from `G = Q^{-1}` at the first `w`.
pub fn solve_sandwich(prob: &SandwichProblem, z: Complex64, sched: &ContinuationSchedule) -> Result<SandwichSolution> {
    let mut history: Vec<(f64, Quaternion2)> = Vec::new();
    let mut last = None;
    for &w in &sched.w_values {
        let q = Quaternion2::argument(z, Complex64::new(w, 0.0));
        let seed = match history.as_slice() {
            [] => q.inv()?,
            [.., (w0, g0)] if history.len() == 1 => {
                let _ = w0;
                *g0
            }
            [.., (w1, g1), (w2, g2)] => {
                // secant predictor in w
                let t = Complex64::new((w - w2) / (w2 - w1), 0.0);
                *g2 + (*g2 - *g1).scale(t)
            }
            _ => unreachable!(),
        };
        match solve_at(prob, &q, seed, sched.tol, sched.max_iter) {
            Ok((g, res)) => {
                history.push((w, g));
                last = Some(SandwichSolution::from_value(z, w, g, res));
            }
            Err(_) => {
                return Err(Error::Continuation {
                    failed_w: w,
                    last_converged_w: history.last().map(|h| h.0),
                })
            }
        }
    }
    Ok(last.expect("schedule is nonempty"))
}

/// Solves along a path of points: full continuation at the first point, then
/// seeded solves at the final `w`; a point whose seeded solve fails or changes
/// the inside/outside classification is redone with the full continuation.
pub fn solve_sandwich_path(
    prob: &SandwichProblem,
    zs: &[Complex64],
    sched: &ContinuationSchedule,
) -> Result<Vec<SandwichSolution>> {
    let mut out: Vec<SandwichSolution> = Vec::with_capacity(zs.len());
    for &z in zs {
        let sol = match out.last() {
            None => solve_sandwich(prob, z, sched)?,
            Some(prev) => {
                match solve_sandwich_seeded(prob, z, sched.final_w(), &prev.value, sched.tol, sched.max_iter) {
                    Ok(s) if s.inside == prev.inside => s,
                    _ => solve_sandwich(prob, z, sched)?,
                }
            }
        };
        out.push(sol);
    }
    Ok(out)
}

/// Eigenvector overlap correlator `|v|^2 / pi`.
pub fn overlap_from_field(v_abs: f64) -> f64 {
    v_abs * v_abs / PI
}

/// `g` sampled on a square grid: `values[[i, j]] = g(x0 + i h + i (y0 + j h))`.
#[derive(Debug, Clone)]
pub struct GreenField {
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub values: Array2<Complex64>,
}

impl GreenField {
    pub fn sample<F: FnMut(Complex64) -> Result<Complex64>>(
        x0: f64,
        y0: f64,
        h: f64,
        n: usize,
        mut g: F,
    ) -> Result<Self> {
        let mut values = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                values[[i, j]] = g(Complex64::new(x0 + i as f64 * h, y0 + j as f64 * h))?;
            }
        }
        Ok(Self { x0, y0, h, values })
    }
}

/// Density on the interior points of a [`GreenField`].
#[derive(Debug, Clone)]
pub struct DensityField {
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub values: Array2<f64>,
}

/// RMS density below which differences are measured absolutely (holomorphic regions).
const DENSITY_FLOOR: f64 = 1e-4;

/// `rho = (1/pi) d g / d z̄ = (d_x g + i d_y g) / (2 pi)` by central differences.
/// The estimate with spacing `2h` must agree with the one at `h` to 5% in
/// relative L2 norm, otherwise the grid is too coarse.
pub fn density_from_field(field: &GreenField) -> Result<DensityField> {
    let (nx, ny) = field.values.dim();
    if nx < 5 || ny < 5 {
        return Err(Error::InvalidInput("field needs at least 5 x 5 samples".into()));
    }
    let g = &field.values;
    let h = field.h;
    let i_unit = Complex64::new(0.0, 1.0);
    let mut fine = Array2::zeros((nx - 4, ny - 4));
    let mut diff2 = 0.0;
    let mut norm2 = 0.0;
    let mut coarse2 = 0.0;
    for i in 2..nx - 2 {
        for j in 2..ny - 2 {
            let d1 = (g[[i + 1, j]] - g[[i - 1, j]]) / (2.0 * h) + i_unit * (g[[i, j + 1]] - g[[i, j - 1]]) / (2.0 * h);
            let d2 = (g[[i + 2, j]] - g[[i - 2, j]]) / (4.0 * h) + i_unit * (g[[i, j + 2]] - g[[i, j - 2]]) / (4.0 * h);
            let (r1, r2) = (d1.re / (2.0 * PI), d2.re / (2.0 * PI));
            fine[[i - 2, j - 2]] = r1;
            diff2 += (r1 - r2) * (r1 - r2);
            norm2 += r1 * r1;
            coarse2 += r2 * r2;
        }
    }
    let count = ((nx - 4) * (ny - 4)) as f64;
    let scale = (norm2.max(coarse2) / count).sqrt().max(DENSITY_FLOOR);
    let rel = (diff2 / count).sqrt() / scale;
    if rel > 0.05 {
        return Err(Error::Resolution { relative_change: rel });
    }
    Ok(DensityField {
        x0: field.x0 + 2.0 * h,
        y0: field.y0 + 2.0 * h,
        h,
        values: fine,
    })
}

/// Radial shortcut `rho(s) = f'(s) / (2 pi s)` for `f = g z` sampled on an ascending
/// grid; central differences inside, one-sided at the ends.
pub fn radial_density_from_f(grid: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    let n = grid.len();
    if n < 2 || f.len() != n {
        return Err(Error::InvalidInput("need at least two matching samples".into()));
    }
    Ok((0..n)
        .map(|i| {
            let (a, b) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            let df = (f[b] - f[a]) / (grid[b] - grid[a]);
            df / (2.0 * PI * grid[i])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frv::{wishart_transforms, TransformKind};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pseudo_random(t: usize, seed: u64) -> Array2<Complex64> {
        // small deterministic generator; values in [-1, 1]
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        Array2::from_shape_fn((t, t), |_| c(next(), next()))
    }

    #[test]
    fn schur_matches_dense() {
        let a = pseudo_random(5, 3);
        let g = Quaternion2::new(c(0.1, -0.05), c(0.02, 0.03), c(-0.04, 0.01), c(0.07, 0.02));
        let fast = block_trace_resolvent(&a, &g, 0.7).unwrap();
        let dense = block_trace_resolvent_dense(&a, &g, 0.7).unwrap();
        assert!((fast - dense).max_abs() < 1e-12);
        // singular upper-left block routes to the dense path
        let a = Array2::from_diag_elem(3, ONE);
        let g = Quaternion2::new(ONE, c(0.1, 0.0), c(0.1, 0.0), c(0.5, 0.0));
        let out = block_trace_resolvent(&a, &g, 1.0).unwrap();
        let dense = block_trace_resolvent_dense(&a, &g, 1.0).unwrap();
        assert!((out - dense).max_abs() < 1e-12);
    }

    #[test]
    fn moment_gf_examples() {
        let zero = Array2::zeros((3, 3));
        let q = Quaternion2::argument(c(0.3, 0.1), c(0.2, 0.0));
        assert_eq!(quaternionic_moment_gf(&zero, &q).unwrap().max_abs(), 0.0);
        // identity: M11 at Q = diag(z, z̄) is 1/(1 - z)
        let eye = Array2::from_diag_elem(4, ONE);
        let z = c(0.3, 0.2);
        let m = quaternionic_moment_gf(&eye, &Quaternion2::argument(z, ZERO)).unwrap();
        assert!((m.m[0][0] - 1.0 / (1.0 - z)).norm() < 1e-14);
        let dense = block_trace_resolvent_dense(&eye, &Quaternion2::argument(z, ZERO), 1.0).unwrap();
        assert!((m - dense).max_abs() < 1e-14);
    }

    #[test]
    fn mixed_moment_rule_on_nilpotent_example() {
        let mut a = Array2::zeros((2, 2));
        a[[0, 1]] = ONE;
        // Tr(A A†)/T: coefficient of Q_{1 1̄} in the (1, 1̄) component
        let coef = moment_coefficient(&a, (0, 1), [0, 1, 0, 0], 8).unwrap();
        assert!((coef - 0.5).norm() < 1e-10, "{coef}");
        // Tr(A A† A)/T = 0: coefficient of Q_{1 1̄} Q_{1̄ 1} in M11
        let coef = moment_coefficient(&a, (0, 0), [0, 1, 1, 0], 8).unwrap();
        assert!(coef.norm() < 1e-10);
        // Tr(A†A A†A)... as (1̄, 1, 1̄, 1): Q_{1̄1} Q_{11̄} Q_{1̄1} in the (1̄, 1) component
        let coef = moment_coefficient(&a, (1, 0), [0, 1, 2, 0], 8).unwrap();
        assert!((coef - 0.5).norm() < 1e-10, "{coef}");
    }

    #[test]
    fn wishart_marchenko_pastur() {
        let prob = SandwichProblem::wishart(8, 1.0).unwrap();
        let sol = solve_sandwich(&prob, c(4.0, 0.0), &ContinuationSchedule::default()).unwrap();
        // z = 4 is the upper edge at r = 1, where the regularized solution is off by O(sqrt(w))
        assert!((sol.g - 0.5).norm() < 1e-3, "{:?}", sol.g);
        assert!(sol.v_abs < 1e-3);
        let sol = solve_sandwich(&prob, c(5.0, 0.0), &ContinuationSchedule::default()).unwrap();
        let mp = wishart_transforms(TransformKind::Green, c(5.0, 0.0), 1.0).unwrap();
        assert!((sol.g - mp).norm() < 1e-8 && !sol.inside);
        for &(z, r) in &[(c(1.0, 0.5), 0.5), (c(2.5, -0.3), 0.3), (c(0.5, 1.0), 2.0)] {
            let prob = SandwichProblem::wishart(4, r).unwrap();
            let sol = solve_sandwich(&prob, z, &ContinuationSchedule::default()).unwrap();
            let mp = wishart_transforms(TransformKind::Green, z, r).unwrap();
            assert!((sol.g - mp).norm() < 1e-6, "{z}: {} vs {mp}", sol.g);
        }
    }

    #[test]
    fn zero_matrix_gives_free_resolvent() {
        let prob = SandwichProblem::new(Array2::zeros((3, 3)), 0.5, 1.0 / 3.0).unwrap();
        let z = c(0.4, 0.3);
        let sol = solve_sandwich(&prob, z, &ContinuationSchedule::default()).unwrap();
        assert!((sol.g - 1.0 / z).norm() < 1e-6);
        assert!(sol.v_abs < 1e-6);
    }

    #[test]
    fn cyclic_shift_inside_spectrum() {
        // unit-lag law at r = 1/2, |z| = 0.6 from the cubic 4f^3r^3 + 4f^2r^2(1-r) + fr((1-r)^2 - s^2) - s^2 = 0
        let prob = SandwichProblem::cyclic(64, 1, 0.5).unwrap();
        let s = 0.6;
        let sol = solve_sandwich(&prob, c(s, 0.0), &ContinuationSchedule::default()).unwrap();
        let f = (sol.g * s).re;
        let r = 0.5f64;
        let res = 4.0 * f.powi(3) * r.powi(3) + 4.0 * f * f * r * r * (1.0 - r) + f * r * ((1.0 - r).powi(2) - s * s) - s * s;
        assert!(res.abs() < 1e-6, "f = {f}, residual {res}");
        assert!(sol.inside);
        assert!(sol.value.conjugation_defect() < 1e-8);
        assert!((sol.value.off_diagonal_product().re + sol.v_abs * sol.v_abs).abs() < 1e-8);
    }

    #[test]
    fn schedule_validation() {
        assert!(ContinuationSchedule::new(vec![1e-1, 1e-2], 1e-10, 10).is_err());
        assert!(ContinuationSchedule::new(vec![1e-1, 1e-1, 1e-7], 1e-10, 10).is_err());
        let d = ContinuationSchedule::default();
        assert!(d.final_w() <= 1e-7 && d.w_values[0] == 0.1);
    }

    #[test]
    fn field_density_examples() {
        let holo = GreenField::sample(0.5, 0.5, 1e-3, 9, |z| Ok(1.0 / z)).unwrap();
        let d = density_from_field(&holo).unwrap();
        assert!(d.values.iter().all(|v| v.abs() < 1e-5));
        let disc = GreenField::sample(-0.1, -0.1, 0.05, 7, |z| Ok(z.conj())).unwrap();
        let d = density_from_field(&disc).unwrap();
        assert!(d.values.iter().all(|v| (v - 1.0 / PI).abs() < 1e-12));
        // a field varying on the grid scale is rejected
        let rough = GreenField::sample(0.0, 0.0, 1.0, 9, |z| Ok(Complex64::new((3.0 * z.re).sin(), 0.0))).unwrap();
        assert!(matches!(density_from_field(&rough), Err(Error::Resolution { .. })));
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(overlap_from_field(0.0), 0.0);
        assert!((overlap_from_field(0.5) - 0.25 / PI).abs() < 1e-16);
    }
}
