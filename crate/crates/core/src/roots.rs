//! Closed-form polynomial root solvers, branch selection and a small Newton solver.
//!
//! Cubics use Cardano's formulas, quartics Ferrari's; both drop to the
//! eigenvalues of the companion matrix when roots are about to collide, where
//! the radicals lose all accuracy. Every returned root gets a few Newton
//! polishing steps on the original polynomial.

use std::cmp::Ordering;

use ndarray::{Array1, Array2};
use ndarray_linalg::{EigVals, Solve};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Roots with `|Im| <= REAL_TOL * (1 + |Re|)` are reported as exactly real.
pub const REAL_TOL: f64 = 1e-9;

/// Relative discriminant below which the closed forms hand over to the companion matrix.
const DISCRIMINANT_TOL: f64 = 1e-10;

/// Leading coefficients smaller than this (relative to the largest) are treated as zero.
const LEADING_TOL: f64 = 1e-14;

/// Real polynomial, coefficients in ascending order of degree.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyReal {
    coeffs: Vec<f64>,
}

impl PolyReal {
    /// Builds a polynomial, trimming exactly-zero leading coefficients.
    pub fn new(mut coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite polynomial coefficient".into()));
        }
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.len() < 2 {
            return Err(Error::InvalidInput("polynomial must have degree >= 1".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Degree after discarding leading coefficients that are negligible next to the rest.
    pub fn effective_degree(&self) -> usize {
        let scale = self.scale();
        let mut d = self.degree();
        while d > 0 && self.coeffs[d].abs() <= LEADING_TOL * scale {
            d -= 1;
        }
        d
    }

    /// Largest coefficient magnitude.
    pub fn scale(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        horner(&self.complex_coeffs(), x)
    }

    /// `|p(x)| / max|c_k|`, the residual measure used throughout the tests.
    pub fn relative_residual(&self, x: Complex64) -> f64 {
        self.eval(x).norm() / self.scale()
    }

    fn complex_coeffs(&self) -> Vec<Complex64> {
        self.coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect()
    }

    fn truncated(&self, degree: usize) -> PolyReal {
        PolyReal {
            coeffs: self.coeffs[..=degree].to_vec(),
        }
    }
}

/// How [`select_branch`] picks one root out of several.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchSelector {
    /// Root nearest to `previous`, rejected if it lies further than `max_jump` away.
    Continuity { previous: Complex64, max_jump: f64 },
    /// Real root inside `[lo, hi]`. When several qualify, `monotonic` resolves the
    /// ambiguity towards the largest one (the upper envelope of a nondecreasing
    /// CDF branch); otherwise the ambiguity is an error.
    Range { lo: f64, hi: f64, monotonic: bool },
    /// Root nearest to an asymptotic estimate supplied by the caller.
    Asymptotic { target: Complex64 },
}

impl BranchSelector {
    pub fn continuity(previous: Complex64, max_jump: f64) -> Result<Self> {
        if !(previous.re.is_finite() && previous.im.is_finite()) {
            return Err(Error::InvalidInput("continuity needs a finite previous root".into()));
        }
        if !(max_jump > 0.0) {
            return Err(Error::InvalidInput("max_jump must be positive".into()));
        }
        Ok(Self::Continuity { previous, max_jump })
    }

    pub fn range(lo: f64, hi: f64, monotonic: bool) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidInput(format!("empty range [{lo}, {hi}]")));
        }
        Ok(Self::Range { lo, hi, monotonic })
    }
}

pub fn is_real(z: Complex64) -> bool {
    z.im.abs() <= REAL_TOL * (1.0 + z.re.abs())
}

fn cmp_roots(a: &Complex64, b: &Complex64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

fn horner(coeffs: &[Complex64], x: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
}

fn horner_with_derivative(coeffs: &[Complex64], x: Complex64) -> (Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    coeffs.iter().rev().fold((zero, zero), |(p, dp), &c| (p * x + c, dp * x + p))
}

/// A few guarded Newton steps; a step is kept only if it lowers `|p|`.
fn polish(coeffs: &[Complex64], mut x: Complex64) -> Complex64 {
    let (mut p, mut dp) = horner_with_derivative(coeffs, x);
    for _ in 0..6 {
        if p.norm() == 0.0 || dp.norm() == 0.0 {
            break;
        }
        let trial = x - p / dp;
        let (tp, tdp) = horner_with_derivative(coeffs, trial);
        if !(tp.norm() < p.norm()) {
            break;
        }
        x = trial;
        p = tp;
        dp = tdp;
    }
    x
}

/// Eigenvalues of the companion matrix of a complex polynomial (ascending coefficients).
pub fn companion_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return Err(Error::InvalidInput("constant polynomial has no roots".into()));
    }
    let lead = coeffs[n];
    if lead.norm() == 0.0 {
        return Err(Error::InvalidInput("zero leading coefficient".into()));
    }
    let mut c = Array2::<Complex64>::zeros((n, n));
    for i in 1..n {
        c[[i, i - 1]] = Complex64::new(1.0, 0.0);
    }
    for (i, &a) in coeffs[..n].iter().enumerate() {
        c[[i, n - 1]] = -a / lead;
    }
    let ev = c.eigvals()?;
    Ok(ev.iter().map(|&z| polish(coeffs, z)).collect())
}

fn quadratic_roots(a: Complex64, b: Complex64, c: Complex64) -> [Complex64; 2] {
    let sq = (b * b - 4.0 * a * c).sqrt();
    // sign chosen to avoid cancellation in -b -/+ sq
    let sq = if (b.conj() * sq).re >= 0.0 { sq } else { -sq };
    let q = -0.5 * (b + sq);
    if q.norm() == 0.0 {
        return [Complex64::new(0.0, 0.0); 2];
    }
    [q / a, c / q]
}

/// Minimum pairwise distance relative to the root scale; small values flag collisions.
fn relative_separation(roots: &[Complex64]) -> f64 {
    let scale = 1.0 + roots.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    let mut min = f64::INFINITY;
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            min = min.min((roots[i] - roots[j]).norm());
        }
    }
    min / scale
}

fn finish_real(p: &PolyReal, mut roots: Vec<Complex64>) -> Vec<Complex64> {
    let cc = p.complex_coeffs();
    for z in roots.iter_mut() {
        *z = polish(&cc, *z);
        if is_real(*z) {
            // re-polish on the real line so that real roots stay exactly real
            *z = Complex64::new(polish(&cc, Complex64::new(z.re, 0.0)).re, 0.0);
        }
    }
    roots.sort_by(cmp_roots);
    roots
}

/// The three roots of a cubic with real coefficients.
pub fn solve_cubic(p: &PolyReal) -> Result<Vec<Complex64>> {
    if p.degree() != 3 {
        return Err(Error::InvalidInput(format!("expected a cubic, got degree {}", p.degree())));
    }
    let eff = p.effective_degree();
    if eff != 3 {
        return Err(Error::InvalidInput(format!(
            "degenerate leading coefficient: effective degree is {eff}, use `roots`"
        )));
    }
    let c = p.coeffs();
    let (a, b, cc, d) = (c[3], c[2], c[1], c[0]);
    let terms = [
        18.0 * a * b * cc * d,
        -4.0 * b.powi(3) * d,
        b * b * cc * cc,
        -4.0 * a * cc.powi(3),
        -27.0 * a * a * d * d,
    ];
    let disc: f64 = terms.iter().sum();
    let disc_scale: f64 = terms.iter().map(|t| t.abs()).sum();
    if disc_scale == 0.0 || disc.abs() <= DISCRIMINANT_TOL * disc_scale {
        let roots = companion_roots(&p.complex_coeffs())?;
        return Ok(finish_real(p, roots));
    }

    let (a2, a1, a0) = (b / a, cc / a, d / a);
    let pp = a1 - a2 * a2 / 3.0;
    let qq = 2.0 * a2.powi(3) / 27.0 - a2 * a1 / 3.0 + a0;
    let shift = a2 / 3.0;
    let roots = if disc > 0.0 {
        // three distinct real roots, trigonometric form
        let m = 2.0 * (-pp / 3.0).sqrt();
        let arg = (3.0 * qq / (pp * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| {
                let t = m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
                Complex64::new(t - shift, 0.0)
            })
            .collect::<Vec<_>>()
    } else {
        let inner = (qq * qq / 4.0 + pp.powi(3) / 27.0).sqrt();
        let big = -qq.signum() * (qq.abs() / 2.0 + inner).cbrt();
        let big = if qq == 0.0 { (pp.powi(3) / 27.0).abs().sqrt().cbrt() } else { big };
        let small = if big != 0.0 { -pp / (3.0 * big) } else { 0.0 };
        let re = -(big + small) / 2.0 - shift;
        let im = 3f64.sqrt() / 2.0 * (big - small).abs();
        vec![
            Complex64::new(big + small - shift, 0.0),
            Complex64::new(re, im),
            Complex64::new(re, -im),
        ]
    };
    Ok(finish_real(p, roots))
}

/// Depressed-quartic (Ferrari) roots of a monic complex quartic `x^4 + a x^3 + b x^2 + c x + d`.
fn ferrari(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> [Complex64; 4] {
    let p = b - 3.0 * a * a / 8.0;
    let q = c - a * b / 2.0 + a * a * a / 8.0;
    let r = d - a * c / 4.0 + a * a * b / 16.0 - 3.0 * a.powi(4) / 256.0;
    let shift = a / 4.0;
    let scale = 1.0 + p.norm() + q.norm().sqrt() + r.norm().sqrt();
    let ys: [Complex64; 4] = if q.norm() <= 1e-14 * scale * scale * scale {
        let [y1, y2] = quadratic_roots(Complex64::new(1.0, 0.0), p, r);
        let (s1, s2) = (y1.sqrt(), y2.sqrt());
        [s1, -s1, s2, -s2]
    } else {
        let cubic = [-q * q, 2.0 * p * p - 8.0 * r, 8.0 * p, Complex64::new(8.0, 0.0)];
        let m = cubic_roots_complex(&cubic)
            .into_iter()
            .max_by(|x, y| x.norm().total_cmp(&y.norm()))
            .unwrap();
        let s = (2.0 * m).sqrt();
        let one = Complex64::new(1.0, 0.0);
        let [y1, y2] = quadratic_roots(one, s, p / 2.0 + m - q / (2.0 * s));
        let [y3, y4] = quadratic_roots(one, -s, p / 2.0 + m + q / (2.0 * s));
        [y1, y2, y3, y4]
    };
    ys.map(|y| y - shift)
}

/// Cardano for complex coefficients (ascending order, degree exactly 3).
fn cubic_roots_complex(coeffs: &[Complex64; 4]) -> [Complex64; 3] {
    let lead = coeffs[3];
    let (a, b, c) = (coeffs[2] / lead, coeffs[1] / lead, coeffs[0] / lead);
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = (q * q / 4.0 + p * p * p / 27.0).sqrt();
    let u3a = -q / 2.0 + disc;
    let u3b = -q / 2.0 - disc;
    let u3 = if u3a.norm() >= u3b.norm() { u3a } else { u3b };
    let shift = a / 3.0;
    if u3.norm() == 0.0 {
        return [-shift; 3];
    }
    let u = u3.powf(1.0 / 3.0);
    let omega = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let mut out = [Complex64::new(0.0, 0.0); 3];
    let mut uk = u;
    for slot in out.iter_mut() {
        *slot = uk - p / (3.0 * uk) - shift;
        uk *= omega;
    }
    let cc = [coeffs[0], coeffs[1], coeffs[2], coeffs[3]];
    out.map(|z| polish(&cc, z))
}

/// The four roots of a quartic with complex coefficients (ascending order).
pub fn solve_quartic_complex(coeffs: &[Complex64; 5]) -> Result<Vec<Complex64>> {
    let scale = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
    if coeffs[4].norm() <= LEADING_TOL * scale {
        return Err(Error::InvalidInput("degenerate leading coefficient in quartic".into()));
    }
    let lead = coeffs[4];
    let roots = ferrari(coeffs[3] / lead, coeffs[2] / lead, coeffs[1] / lead, coeffs[0] / lead);
    let mut roots: Vec<Complex64> = roots.iter().map(|&z| polish(coeffs, z)).collect();
    if relative_separation(&roots) < DISCRIMINANT_TOL.sqrt() {
        roots = companion_roots(coeffs)?;
    }
    roots.sort_by(cmp_roots);
    Ok(roots)
}

/// The four roots of a quartic with real coefficients, sorted by real then imaginary part.
pub fn solve_quartic(p: &PolyReal) -> Result<Vec<Complex64>> {
    if p.degree() != 4 {
        return Err(Error::InvalidInput(format!("expected a quartic, got degree {}", p.degree())));
    }
    let eff = p.effective_degree();
    if eff != 4 {
        return Err(Error::InvalidInput(format!(
            "degenerate leading coefficient: effective degree is {eff}, use `roots`"
        )));
    }
    let cc = p.complex_coeffs();
    let lead = cc[4];
    let roots = ferrari(cc[3] / lead, cc[2] / lead, cc[1] / lead, cc[0] / lead);
    let mut roots: Vec<Complex64> = roots.iter().map(|&z| polish(&cc, z)).collect();
    if relative_separation(&roots) < DISCRIMINANT_TOL.sqrt() {
        roots = companion_roots(&cc)?;
    }
    Ok(finish_real(p, roots))
}

/// Roots of a real polynomial of effective degree 1..=4; degenerate leading
/// coefficients reduce the degree, so fewer roots come back.
pub fn roots(p: &PolyReal) -> Result<Vec<Complex64>> {
    let eff = p.effective_degree();
    let q = p.truncated(eff);
    let c = q.coeffs();
    match eff {
        0 => Err(Error::InvalidInput("polynomial is numerically constant".into())),
        1 => Ok(vec![Complex64::new(-c[0] / c[1], 0.0)]),
        2 => {
            let [x, y] = quadratic_roots(c[2].into(), c[1].into(), c[0].into());
            Ok(finish_real(&q, vec![x, y]))
        }
        3 => solve_cubic(&q),
        4 => solve_quartic(&q),
        d => Err(Error::InvalidInput(format!("no closed form for degree {d}"))),
    }
}

/// Picks one root according to `sel`. Ties in continuity mode go to the larger real part.
pub fn select_branch(roots: &[Complex64], sel: &BranchSelector) -> Result<Complex64> {
    let lost = |reason: String| Error::BranchLost {
        candidates: roots.to_vec(),
        reason,
    };
    match *sel {
        BranchSelector::Continuity { previous, max_jump } => {
            let best = nearest(roots, previous).ok_or_else(|| lost("no roots".into()))?;
            let jump = (best - previous).norm();
            if jump > max_jump {
                return Err(lost(format!("jump {jump:e} exceeds {max_jump:e}")));
            }
            Ok(best)
        }
        BranchSelector::Asymptotic { target } => {
            nearest(roots, target).ok_or_else(|| lost("no roots".into()))
        }
        BranchSelector::Range { lo, hi, monotonic } => {
            let tol = REAL_TOL * (1.0 + lo.abs().max(hi.abs()));
            let mut admissible: Vec<f64> = roots
                .iter()
                .filter(|z| is_real(**z) && z.re >= lo - tol && z.re <= hi + tol)
                .map(|z| z.re)
                .collect();
            admissible.sort_by(f64::total_cmp);
            admissible.dedup_by(|a, b| (*a - *b).abs() <= tol);
            match admissible.len() {
                0 => Err(lost(format!("no real root in [{lo}, {hi}]"))),
                1 => Ok(Complex64::new(admissible[0], 0.0)),
                _ if monotonic => Ok(Complex64::new(*admissible.last().unwrap(), 0.0)),
                _ => Err(lost(format!("ambiguous: {} real roots in [{lo}, {hi}]", admissible.len()))),
            }
        }
    }
}

fn nearest(roots: &[Complex64], target: Complex64) -> Option<Complex64> {
    roots.iter().copied().min_by(|a, b| {
        let (da, db) = ((a - target).norm(), (b - target).norm());
        if (da - db).abs() <= 1e-12 * (1.0 + da.max(db)) {
            // equidistant: larger real part first
            b.re.total_cmp(&a.re)
        } else {
            da.total_cmp(&db)
        }
    })
}

/// Options for [`newton_system`].
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 50 }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Central-difference Jacobian of `residual` at `x`, step `1e-7 (1 + |x_j|)`.
pub fn fd_jacobian<F>(residual: &mut F, x: &[f64], m: usize) -> Result<Array2<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let mut jac = Array2::<f64>::zeros((m, n));
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = 1e-7 * (1.0 + x[j].abs());
        xp[j] = x[j] + h;
        let fp = residual(&xp)?;
        xp[j] = x[j] - h;
        let fm = residual(&xp)?;
        xp[j] = x[j];
        for i in 0..m {
            jac[[i, j]] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Newton's method for a square nonlinear system with a finite-difference
/// Jacobian and step halving. Converges when `||residual||_inf <= tol`.
pub fn newton_system<F>(mut residual: F, x0: &[f64], opts: &NewtonOptions) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = residual(&x)?;
    if fx.len() != n {
        return Err(Error::InvalidInput(format!(
            "residual has {} components for {} unknowns",
            fx.len(),
            n
        )));
    }
    let mut norm = inf_norm(&fx);
    for iter in 0..opts.max_iter {
        if norm <= opts.tol {
            return Ok(x);
        }
        let jac = fd_jacobian(&mut residual, &x, n)?;
        let rhs = Array1::from_iter(fx.iter().map(|v| -v));
        let step = match jac.solve_into(rhs) {
            Ok(s) => s,
            Err(_) => {
                return Err(Error::NonConvergence {
                    iterations: iter,
                    residual: norm,
                    last: x,
                })
            }
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + lambda * s).collect();
            if let Ok(ft) = residual(&trial) {
                let tn = inf_norm(&ft);
                if tn.is_finite() && (tn < norm || tn <= opts.tol) {
                    x = trial;
                    fx = ft;
                    norm = tn;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence {
                iterations: iter,
                residual: norm,
                last: x,
            });
        }
    }
    if norm <= opts.tol {
        Ok(x)
    } else {
        Err(Error::NonConvergence {
            iterations: opts.max_iter,
            residual: norm,
            last: x,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_residual(p: &PolyReal, roots: &[Complex64]) -> f64 {
        roots.iter().map(|&z| p.relative_residual(z)).fold(0.0, f64::max)
    }

    #[test]
    fn cubic_roots_of_unity() {
        let p = PolyReal::new(vec![-1.0, 0.0, 0.0, 1.0]).unwrap();
        let r = solve_cubic(&p).unwrap();
        let h = 3f64.sqrt() / 2.0;
        assert!((r[0] - c(-0.5, -h)).norm() < 1e-14);
        assert!((r[1] - c(-0.5, h)).norm() < 1e-14);
        assert_eq!(r[2], c(1.0, 0.0));
        assert!(max_residual(&p, &r) <= 1e-12);
    }

    #[test]
    fn cubic_radial_cdf_examples() {
        // 4F^3 - F/3 - 1/3 at r = 1, s^2 = 1/3
        let p = PolyReal::new(vec![-1.0 / 3.0, -1.0 / 3.0, 0.0, 4.0]).unwrap();
        let r = solve_cubic(&p).unwrap();
        let real: Vec<_> = r.iter().filter(|z| z.im == 0.0).collect();
        assert_eq!(real.len(), 1);
        assert!((real[0].re - 0.5).abs() < 1e-14);

        let p = PolyReal::new(vec![-2.0, -2.0, 0.0, 4.0]).unwrap();
        let r = solve_cubic(&p).unwrap();
        let real: Vec<_> = r.iter().filter(|z| z.im == 0.0).collect();
        assert_eq!(real.len(), 1);
        assert!((real[0].re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cubic_three_real_and_double_root() {
        // (x-1)(x-2)(x-3)
        let p = PolyReal::new(vec![-6.0, 11.0, -6.0, 1.0]).unwrap();
        let r = solve_cubic(&p).unwrap();
        for (z, e) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert_eq!(z.im, 0.0);
            assert!((z.re - e).abs() < 1e-13);
        }
        // (x-1)^2 (x+2): zero discriminant goes through the companion path
        let p = PolyReal::new(vec![2.0, -3.0, 0.0, 1.0]).unwrap();
        let r = solve_cubic(&p).unwrap();
        assert!((r[0].re + 2.0).abs() < 1e-12);
        assert!(max_residual(&p, &r) <= 1e-12);
    }

    #[test]
    fn cubic_rejects_wrong_degree() {
        let p = PolyReal::new(vec![1.0, 2.0, 1.0]).unwrap();
        assert!(solve_cubic(&p).is_err());
        let p = PolyReal::new(vec![1.0, 2.0, 1.0, 1e-20]).unwrap();
        assert!(matches!(solve_cubic(&p), Err(Error::InvalidInput(_))));
        assert_eq!(roots(&p).unwrap().len(), 2);
    }

    #[test]
    fn quartic_product_of_quadratics() {
        // (x^2 - 1)(x^2 - 4) = x^4 - 5x^2 + 4
        let p = PolyReal::new(vec![4.0, 0.0, -5.0, 0.0, 1.0]).unwrap();
        let r = solve_quartic(&p).unwrap();
        for (z, e) in r.iter().zip([-2.0, -1.0, 1.0, 2.0]) {
            assert_eq!(z.im, 0.0);
            assert!((z.re - e).abs() < 1e-13);
        }
    }

    #[test]
    fn quartic_symmetrization_against_companion() {
        let z2 = 2.5f64 * 2.5;
        let p = PolyReal::new(vec![1.0, 4.0 - 2.0 * z2, 6.0 - z2, 4.0, 1.0]).unwrap();
        let r = solve_quartic(&p).unwrap();
        assert!(max_residual(&p, &r) <= 1e-11);
        let mut oracle = companion_roots(&p.complex_coeffs()).unwrap();
        oracle.sort_by(cmp_roots);
        for (a, b) in r.iter().zip(oracle.iter()) {
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
        // the physical root is the small one, M ~ mu_2 / z^2 with mu_2 = r/2
        let small = r.iter().min_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
        assert!(small.im == 0.0 && small.re > 0.0 && small.re < 0.5 / z2 * 1.5);
    }

    #[test]
    fn quartic_large_argument_has_vanishing_root() {
        let z2 = 1e8f64;
        let p = PolyReal::new(vec![1.0, 4.0 - 2.0 * z2, 6.0 - z2, 4.0, 1.0]).unwrap();
        let r = solve_quartic(&p).unwrap();
        let small = r.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        assert!(small < 1e-8);
    }

    #[test]
    fn complex_quartic_residual() {
        let coeffs = [c(1.0, 0.5), c(-2.0, 1.0), c(0.3, -0.7), c(1.5, 0.0), c(2.0, 1.0)];
        let r = solve_quartic_complex(&coeffs).unwrap();
        let scale = coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for z in r {
            assert!(horner(&coeffs, z).norm() / scale < 1e-12);
        }
    }

    #[test]
    fn range_selection() {
        let roots = [c(0.5, 0.0), c(-1.2, 0.0), c(0.7, 0.1)];
        let sel = BranchSelector::range(0.0, 1.0, true).unwrap();
        assert_eq!(select_branch(&roots, &sel).unwrap(), c(0.5, 0.0));
        let sel = BranchSelector::range(2.0, 3.0, true).unwrap();
        assert!(matches!(select_branch(&roots, &sel), Err(Error::BranchLost { .. })));
        assert!(select_branch(&[], &BranchSelector::Asymptotic { target: c(0.0, 0.0) }).is_err());
        assert!(BranchSelector::range(1.0, 1.0, false).is_err());
    }

    #[test]
    fn continuity_selection_and_ties() {
        let roots = [c(1.0, 0.0), c(-1.0, 0.0)];
        let sel = BranchSelector::continuity(c(0.0, 0.0), 2.0).unwrap();
        assert_eq!(select_branch(&roots, &sel).unwrap(), c(1.0, 0.0));
        let sel = BranchSelector::continuity(c(0.9, 0.0), 0.05).unwrap();
        assert!(select_branch(&roots, &sel).is_err());
        assert!(BranchSelector::continuity(c(f64::NAN, 0.0), 1.0).is_err());
    }

    #[test]
    fn newton_sqrt_two() {
        let x = newton_system(
            |x| Ok(vec![x[0] * x[0] - 2.0, x[1] - x[0]]),
            &[1.5, 1.5],
            &NewtonOptions::default(),
        )
        .unwrap();
        assert!((x[0] - 2f64.sqrt()).abs() < 1e-12);
        assert!((x[1] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn newton_reports_diagnostics() {
        let opts = NewtonOptions { tol: 1e-14, max_iter: 2 };
        let err = newton_system(|x| Ok(vec![x[0].exp() - 1e-6]), &[30.0], &opts).unwrap_err();
        match err {
            Error::NonConvergence { residual, last, .. } => {
                assert!(residual > 0.0);
                assert_eq!(last.len(), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
