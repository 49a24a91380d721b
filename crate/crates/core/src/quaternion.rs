use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// 2x2 complex matrix used for quaternionic arguments `(z, i w̄; i w, z̄)` and
/// values `(g, i v̄; i v, ḡ)`. Row/column index 0 is the holomorphic sector,
/// index 1 the conjugate (dagger) sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion2 {
    pub m: [[Complex64; 2]; 2],
}

impl Quaternion2 {
    pub fn new(a11: Complex64, a12: Complex64, a21: Complex64, a22: Complex64) -> Self {
        Self {
            m: [[a11, a12], [a21, a22]],
        }
    }

    /// Argument form `(z, i w̄; i w, z̄)`.
    pub fn argument(z: Complex64, w: Complex64) -> Self {
        Self::new(z, I * w.conj(), I * w, z.conj())
    }

    /// Value form `(g, i v̄; i v, ḡ)`.
    pub fn value(g: Complex64, v: Complex64) -> Self {
        Self::new(g, I * v.conj(), I * v, g.conj())
    }

    pub fn zero() -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self::new(z, z, z, z)
    }

    pub fn identity() -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        Self::new(o, z, z, o)
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.m[i][j]
    }

    /// Upper-left entry (`g` for values, `z` for arguments).
    pub fn g(&self) -> Complex64 {
        self.m[0][0]
    }

    /// `v` read from the lower-left entry `i v`.
    pub fn v(&self) -> Complex64 {
        -I * self.m[1][0]
    }

    /// Product of the off-diagonal entries; `-|v|^2` in value form.
    pub fn off_diagonal_product(&self) -> Complex64 {
        self.m[0][1] * self.m[1][0]
    }

    /// `|q22 - conj(q11)|`, zero for a well-formed value or argument.
    pub fn conjugation_defect(&self) -> f64 {
        (self.m[1][1] - self.m[0][0].conj()).norm()
    }

    pub fn det(&self) -> Complex64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> Complex64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.m[0][0] * s, self.m[0][1] * s, self.m[1][0] * s, self.m[1][1] * s)
    }

    pub fn inv(&self) -> Result<Self> {
        let d = self.det();
        let size = self.max_abs();
        if d.norm() <= 1e-300 || d.norm() <= 1e-15 * size * size {
            return Err(Error::Singular("2x2 quaternion is not invertible".into()));
        }
        let [[a, b], [c, e]] = self.m;
        Ok(Self::new(e / d, -b / d, -c / d, a / d))
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().flatten().fold(0.0_f64, |acc, x| acc.max(x.norm()))
    }

    /// Entries in row-major order.
    pub fn to_array(&self) -> [Complex64; 4] {
        [self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]]
    }

    pub fn from_array(a: [Complex64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

impl Add for Quaternion2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let a = self.to_array();
        let b = o.to_array();
        Self::from_array([a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]])
    }
}

impl Sub for Quaternion2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Neg for Quaternion2 {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul for Quaternion2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (self.m, o.m);
        let e = |i: usize, j: usize| a[i][0] * b[0][j] + a[i][1] * b[1][j];
        Self::new(e(0, 0), e(0, 1), e(1, 0), e(1, 1))
    }
}
