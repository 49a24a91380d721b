use ndarray::{s, Array2, ArrayView2};
use ndarray_linalg::{Cholesky, Diag, SolveTriangular, UPLO};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    /// Real and imaginary parts each `Normal(0, 1/2)`.
    Complex,
    /// `Normal(0, 1)`.
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    LaggedNilpotent,
    LaggedCyclic,
    Symmetrized,
    WhitenedSquare,
    IndependentProduct,
}

impl Variant {
    /// Variants whose matrices are Hermitian (real spectrum, no overlaps).
    pub fn is_hermitian(self) -> bool {
        matches!(self, Self::Symmetrized | Self::WhitenedSquare)
    }
}

/// A Monte-Carlo ensemble: `samples` draws of an `N x T` Gaussian matrix, each
/// turned into an `N x N` matrix according to `variant`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n: usize,
    pub t: usize,
    pub tau: usize,
    pub field: Field,
    pub variant: Variant,
    pub samples: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.t < 2 {
            return Err(Error::InvalidInput("N and T must be at least 2".into()));
        }
        if self.tau >= self.t {
            return Err(Error::InvalidInput(format!("tau = {} must be below T = {}", self.tau, self.t)));
        }
        if self.samples == 0 {
            return Err(Error::InvalidInput("need at least one sample".into()));
        }
        if self.variant == Variant::WhitenedSquare && self.n >= self.t - self.tau {
            return Err(Error::Singular(format!(
                "whitening needs N < T - tau, got N = {} and T - tau = {}",
                self.n,
                self.t - self.tau
            )));
        }
        Ok(())
    }

    pub fn r(&self) -> f64 {
        self.n as f64 / self.t as f64
    }

    /// The `N x N` matrix of sample `index`.
    pub fn build(&self, index: u64) -> Result<Array2<Complex64>> {
        match self.variant {
            Variant::LaggedNilpotent | Variant::LaggedCyclic | Variant::Symmetrized | Variant::WhitenedSquare => {
                let x = sample_gaussian(self.n, self.t, self.field, self.seed, index);
                match self.variant {
                    Variant::LaggedNilpotent => Ok(build_lagged(x.view(), self.tau, false)),
                    Variant::LaggedCyclic => Ok(build_lagged(x.view(), self.tau, true)),
                    Variant::Symmetrized => Ok(symmetrized_sample(x.view(), self.tau)),
                    _ => whitened_square(x.view(), self.tau),
                }
            }
            Variant::IndependentProduct => {
                let len = self.t - self.tau;
                let x = sample_gaussian(self.n, 2 * len, self.field, self.seed, index);
                Ok(independent_product(x.slice(s![.., ..len]), x.slice(s![.., len..])))
            }
        }
    }
}

/// `N x T` Gaussian matrix from the stream `(seed, index)`.
pub fn sample_gaussian(n: usize, t: usize, field: Field, seed: u64, index: u64) -> Array2<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    Array2::from_shape_simple_fn((n, t), || match field {
        Field::Complex => {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * half, im * half)
        }
        Field::Real => Complex64::new(rng.sample(StandardNormal), 0.0),
    })
}

fn dagger(a: ArrayView2<Complex64>) -> Array2<Complex64> {
    a.t().mapv(|x| x.conj())
}

/// `X D X† / (T - tau)` with the nilpotent shift, or `X D X† / T` with the cyclic
/// one, as a product of column-shifted blocks.
pub fn build_lagged(x: ArrayView2<Complex64>, tau: usize, cyclic: bool) -> Array2<Complex64> {
    let t = x.ncols();
    let len = t - tau;
    let lead = x.slice(s![.., ..len]);
    let lagged = x.slice(s![.., tau..]);
    let mut c = lead.dot(&dagger(lagged));
    if cyclic && tau > 0 {
        // wrapped columns t + tau >= T
        c += &x.slice(s![.., len..]).dot(&dagger(x.slice(s![.., ..tau])));
        c.mapv_inplace(|v| v / t as f64);
    } else {
        c.mapv_inplace(|v| v / len as f64);
    }
    c
}

/// `(C + C†) / 2` for the nilpotent lagged `C`.
pub fn symmetrized_sample(x: ArrayView2<Complex64>, tau: usize) -> Array2<Complex64> {
    let c = build_lagged(x, tau, false);
    let ch = dagger(c.view());
    (&c + &ch).mapv(|v| v * 0.5)
}

/// `A B† / L` for two independent `N x L` blocks.
pub fn independent_product(a: ArrayView2<Complex64>, b: ArrayView2<Complex64>) -> Array2<Complex64> {
    let len = a.ncols();
    a.dot(&dagger(b)).mapv(|v| v / len as f64)
}

/// Lower Cholesky factor `L` of the covariance `W = L L†`, so that `L^{-1}` whitens.
/// Any two whitenings differ by a unitary, which leaves the spectrum of `C C†` unchanged.
fn covariance_factor(w: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let singular = || Error::Singular("equal-time covariance is singular".into());
    let l = w.cholesky(UPLO::Lower).map_err(|_| singular())?;
    let scale = w.diag().iter().fold(0.0_f64, |m, v| m.max(v.re));
    if l.diag().iter().any(|v| !(v.norm_sqr() > 1e-12 * scale)) {
        return Err(singular());
    }
    Ok(l)
}

/// `C C†` of the whitened lagged pair `x = X[:, ..T-tau]`, `y = X[:, tau..]`,
/// each whitened to unit equal-time covariance; Hermitian with spectrum in `[0, 1]`.
///
/// `C = L_x^{-1} (x y† / L) L_y^{-†}`; both covariances come from one Gram matrix
/// of `X` corrected by the `tau` columns each block lacks.
pub fn whitened_square(x: ArrayView2<Complex64>, tau: usize) -> Result<Array2<Complex64>> {
    let t = x.ncols();
    let len = t - tau;
    let scale = |m: Array2<Complex64>| m.mapv(|v| v / len as f64);
    let lead = x.slice(s![.., ..len]);
    let lagged = x.slice(s![.., tau..]);
    let gram = x.dot(&dagger(x));
    let tail = x.slice(s![.., len..]);
    let head = x.slice(s![.., ..tau]);
    let lx = covariance_factor(&scale(&gram - &tail.dot(&dagger(tail))))?;
    let ly = covariance_factor(&scale(&gram - &head.dot(&dagger(head))))?;
    let cross = scale(lead.dot(&dagger(lagged)));
    let m = lx.solve_triangular(UPLO::Lower, Diag::NonUnit, &cross)?;
    let c = dagger(ly.solve_triangular(UPLO::Lower, Diag::NonUnit, &dagger(m.view()))?.view());
    let cc = c.dot(&dagger(c.view()));
    // symmetrize away rounding so the Hermitian solver sees an exact Hermitian matrix
    let cch = dagger(cc.view());
    Ok((&cc + &cch).mapv(|v| v * 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray_linalg::EigValsh;

    #[test]
    fn deterministic_streams() {
        let a = sample_gaussian(4, 6, Field::Complex, 7, 3);
        let b = sample_gaussian(4, 6, Field::Complex, 7, 3);
        let c = sample_gaussian(4, 6, Field::Complex, 7, 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let r = sample_gaussian(3, 3, Field::Real, 1, 0);
        assert!(r.iter().all(|v| v.im == 0.0));
    }

    #[test]
    fn unit_variance_and_no_pseudo_covariance() {
        let x = sample_gaussian(512, 1024, Field::Complex, 11, 0);
        let count = x.len() as f64;
        let mean_sq = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / count;
        assert!((mean_sq - 1.0).abs() < 0.01);
        // <X X> = 0: the mean of X^2 has standard error 1/sqrt(count)
        let pseudo = x.iter().map(|v| v * v).sum::<Complex64>() / count;
        assert!(pseudo.norm() < 3.0 * (2.0 / count).sqrt());
    }

    #[test]
    fn lagged_construction() {
        let x = sample_gaussian(5, 9, Field::Complex, 2, 0);
        let w = build_lagged(x.view(), 0, false);
        assert!((&w - &dagger(w.view())).iter().all(|v| v.norm() < 1e-14));
        let tau = 2;
        let c = build_lagged(x.view(), tau, false);
        let mut direct = Complex64::new(0.0, 0.0);
        for i in 0..5 {
            for t in 0..9 - tau {
                direct += x[[i, t]] * x[[i, t + tau]].conj();
            }
        }
        assert!((c.diag().sum() - direct / (9 - tau) as f64).norm() < 1e-12);
        // cyclic variant against the explicit permutation
        let mut d = Array2::<Complex64>::zeros((9, 9));
        for t in 0..9 {
            d[[t, (t + tau) % 9]] = Complex64::new(1.0, 0.0);
        }
        let explicit = x.dot(&d).dot(&dagger(x.view())).mapv(|v| v / 9.0);
        let cyc = build_lagged(x.view(), tau, true);
        assert!((&cyc - &explicit).iter().all(|v| v.norm() < 1e-12));
    }

    /// `Lambda^{-1/2} U†` for `W = U Lambda U†`: the symmetric whitening.
    fn symmetric_whitening(w: &Array2<Complex64>) -> Array2<Complex64> {
        use ndarray::ShapeBuilder;
        use ndarray_linalg::Eigh;
        let mut wf = Array2::zeros(w.raw_dim().f());
        wf.assign(w);
        let (lambda, u) = wf.eigh(UPLO::Lower).unwrap();
        let mut out = dagger(u.view());
        for (mut row, &l) in out.rows_mut().into_iter().zip(lambda.iter()) {
            row.mapv_inplace(|v| v / l.sqrt());
        }
        out
    }

    #[test]
    fn cholesky_factor_whitens() {
        let x = sample_gaussian(6, 40, Field::Complex, 5, 1);
        let w = x.dot(&dagger(x.view())).mapv(|v| v / 40.0);
        let l = covariance_factor(&w).unwrap();
        let back = l.dot(&dagger(l.view()));
        assert!((&back - &w).iter().all(|v| v.norm() < 1e-12));
        let white = l.solve_triangular(UPLO::Lower, Diag::NonUnit, &x).unwrap();
        let cov = white.dot(&dagger(white.view())).mapv(|v| v / 40.0);
        for ((i, j), v) in cov.indexed_iter() {
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((v - expected).norm() < 1e-10);
        }
    }

    #[test]
    fn whitened_square_matches_symmetric_whitening() {
        let (n, t, tau) = (5, 23, 3);
        let x = sample_gaussian(n, t, Field::Complex, 4, 2);
        let len = t - tau;
        let white = |b: ArrayView2<Complex64>| {
            let w = b.dot(&dagger(b)).mapv(|v| v / len as f64);
            symmetric_whitening(&w).dot(&b)
        };
        let xw = white(x.slice(s![.., ..len]));
        let yw = white(x.slice(s![.., tau..]));
        let c = xw.dot(&dagger(yw.view())).mapv(|v| v / len as f64);
        let direct = c.dot(&dagger(c.view())).eigvalsh(UPLO::Lower).unwrap();
        let fast = whitened_square(x.view(), tau).unwrap().eigvalsh(UPLO::Lower).unwrap();
        assert!(direct.iter().zip(fast.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn whitened_square_atom_at_one() {
        // alpha = N / (T - tau) = 12/16 > 1/2: 2N - (T - tau) = 8 eigenvalues equal 1
        let x = sample_gaussian(12, 17, Field::Complex, 9, 0);
        let cc = whitened_square(x.view(), 1).unwrap();
        let ev = cc.eigvalsh(UPLO::Lower).unwrap();
        assert_eq!(ev.iter().filter(|&&l| (l - 1.0).abs() < 1e-8).count(), 8);
        assert!(ev.iter().all(|&l| l > -1e-10 && l < 1.0 + 1e-10));
        let x = sample_gaussian(12, 12, Field::Complex, 9, 0);
        assert!(matches!(whitened_square(x.view(), 1), Err(Error::Singular(_))));
    }

    #[test]
    fn spec_validation() {
        let mut spec = EnsembleSpec {
            n: 8,
            t: 16,
            tau: 16,
            field: Field::Complex,
            variant: Variant::LaggedNilpotent,
            samples: 1,
            seed: 0,
        };
        assert!(spec.validate().is_err());
        spec.tau = 1;
        assert!(spec.validate().is_ok());
        assert_eq!(spec.build(0).unwrap().dim(), (8, 8));
        spec.variant = Variant::IndependentProduct;
        spec.tau = 8;
        assert_eq!(spec.build(0).unwrap().dim(), (8, 8));
    }
}
