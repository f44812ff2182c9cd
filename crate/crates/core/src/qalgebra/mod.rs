//! Small dense complex linear algebra and the quantum-state primitives built on it.
//!
//! Dimensions here never exceed 16, so everything is stored densely in
//! row-major `Vec`s and no attempt is made at blocking or BLAS dispatch.

mod density;
mod eigh;

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

pub use num_complex::Complex64 as C64;

pub use density::{
    fidelity, fidelity_pure, partial_trace_frequency, trace_distance, PolDensityMatrix, HERMITIAN_TOL, PSD_TOL,
    TRACE_TOL,
};
pub use eigh::{eigh, Eigh};

use crate::error::{Error, Result};

/// Squared-norm tolerance for a vector to count as normalized.
pub const NORM_TOL: f64 = 1e-12;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// A column vector of complex amplitudes.
#[derive(Clone, PartialEq)]
pub struct CVec(Vec<C64>);

impl CVec {
    pub fn new(entries: Vec<C64>) -> Self {
        CVec(entries)
    }

    pub fn zeros(dim: usize) -> Self {
        CVec(vec![C64::new(0.0, 0.0); dim])
    }

    /// Standard basis vector `e_index` of dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[index] = re(1.0);
        v
    }

    pub fn from_real(entries: &[f64]) -> Self {
        CVec(entries.iter().map(|&x| re(x)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, C64> {
        self.0.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Returns `self / |self|`, or `None` for a (numerically) zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if n < 1e-14 {
            return None;
        }
        Some(self.scale(re(1.0 / n)))
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &CVec) -> C64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scale(&self, k: C64) -> Self {
        CVec(self.0.iter().map(|z| z * k).collect())
    }

    /// Kronecker product with `self` as the major index.
    pub fn tensor(&self, other: &CVec) -> Self {
        let mut out = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.0 {
            for b in &other.0 {
                out.push(a * b);
            }
        }
        CVec(out)
    }

    /// `|self><other|`
    pub fn outer(&self, other: &CVec) -> CMat {
        CMat::from_fn(self.dim(), other.dim(), |i, j| self.0[i] * other.0[j].conj())
    }

    pub fn max_abs_diff(&self, other: &CVec) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Free-function form of [`CVec::tensor`].
pub fn tensor(a: &CVec, b: &CVec) -> CVec {
    a.tensor(b)
}

impl Index<usize> for CVec {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for CVec {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.0[i]
    }
}

impl Add for &CVec {
    type Output = CVec;
    fn add(self, rhs: &CVec) -> CVec {
        CVec(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &CVec {
    type Output = CVec;
    fn sub(self, rhs: &CVec) -> CVec {
        CVec(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl fmt::Debug for CVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, z) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{:.6}{:+.6}i", z.re, z.im)?;
        }
        f.write_str("]")
    }
}

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { re(1.0) } else { re(0.0) })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMat { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(CMat { rows, cols, data })
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { re(values[i]) } else { re(0.0) })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> CVec {
        CVec((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, k: C64) -> Self {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * k).collect(),
        }
    }

    pub fn mul_vec(&self, v: &CVec) -> CVec {
        assert_eq!(self.cols, v.dim(), "matrix-vector dimension mismatch");
        CVec(
            (0..self.rows)
                .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
                .collect(),
        )
    }

    /// `<a|M|b>`
    pub fn sandwich(&self, a: &CVec, b: &CVec) -> C64 {
        a.inner(&self.mul_vec(b))
    }

    pub fn kron(&self, other: &CMat) -> CMat {
        let (r2, c2) = (other.rows, other.cols);
        Self::from_fn(self.rows * r2, self.cols * c2, |i, j| {
            self[(i / r2, j / c2)] * other[(i % r2, j % c2)]
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise deviation from `M = M†`.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// Largest entrywise deviation of `M†M` from the identity.
    pub fn unitary_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&self.adjoint() * self).max_abs_diff(&CMat::identity(self.rows))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitary_deviation() <= tol
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &CMat {
    type Output = CMat;
    fn mul(self, rhs: &CMat) -> CMat {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = CMat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl Add for &CMat {
    type Output = CMat;
    fn add(self, rhs: &CMat) -> CMat {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMat {
    type Output = CMat;
    fn sub(self, rhs: &CMat) -> CMat {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl fmt::Debug for CMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            f.write_str("  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:>9.5}{:+.5}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        f.write_str("]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const S2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn tensor_of_basis_vectors() {
        let h = CVec::from_real(&[1.0, 0.0]);
        let v = CVec::from_real(&[0.0, 1.0]);
        assert_eq!(tensor(&h, &v), CVec::from_real(&[0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn tensor_h_with_diagonal() {
        let h = CVec::from_real(&[1.0, 0.0]);
        let d = CVec::from_real(&[S2, S2]);
        let hd = tensor(&h, &d);
        assert!(hd.max_abs_diff(&CVec::from_real(&[S2, S2, 0.0, 0.0])) < 1e-15);
    }

    fn cvec(dim: usize) -> impl Strategy<Value = CVec> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim)
            .prop_map(|v| CVec::new(v.into_iter().map(|(a, b)| c(a, b)).collect()))
    }

    proptest! {
        #[test]
        fn tensor_norms_multiply(a in cvec(2), b in cvec(4)) {
            let n = a.tensor(&b).norm();
            prop_assert!((n - a.norm() * b.norm()).abs() < 1e-12);
        }

        #[test]
        fn tensor_is_associative(a in cvec(2), b in cvec(2), d in cvec(2)) {
            let left = a.tensor(&b).tensor(&d);
            let right = a.tensor(&b.tensor(&d));
            prop_assert!(left.max_abs_diff(&right) < 1e-14);
        }
    }

    #[test]
    fn kron_matches_vector_tensor() {
        let x = CMat::from_fn(2, 2, |i, j| if i != j { re(1.0) } else { re(0.0) });
        let z = CMat::diag(&[1.0, -1.0]);
        let a = CVec::new(vec![c(0.3, 0.1), c(-0.2, 0.5)]);
        let b = CVec::new(vec![c(0.7, 0.0), c(0.0, -0.4)]);
        let lhs = x.kron(&z).mul_vec(&a.tensor(&b));
        let rhs = x.mul_vec(&a).tensor(&z.mul_vec(&b));
        assert!(lhs.max_abs_diff(&rhs) < 1e-15);
    }

    #[test]
    fn hermitian_and_unitary_checks() {
        let y = CMat::from_row_major(2, 2, vec![re(0.0), c(0.0, -1.0), c(0.0, 1.0), re(0.0)]).unwrap();
        assert!(y.is_hermitian(1e-12));
        assert!(y.is_unitary(1e-10));
        let n = CMat::from_row_major(2, 2, vec![re(1.0), re(1.0), re(0.0), re(1.0)]).unwrap();
        assert!(!n.is_hermitian(1e-12));
        assert!(!n.is_unitary(1e-10));
    }
}
