//! Small dense linear algebra used throughout the crate.
//!
//! Matrices are row-major. Nothing here is tuned for large sizes; the biggest
//! dense problems are the 256×256 brute-force Liouvillian and the
//! `(N+1)`-dimensional ground-state Hamiltonian.

mod hermitian;
mod lu;
mod nonsymmetric;
mod tridiagonal;

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::scalar::Scalar;

pub use hermitian::{hermitian_eigen, hermitian_eigenvalues, HermitianEigen, JACOBI_MAX_DIM};
pub use lu::Lu;
pub use nonsymmetric::eigenvalues as nonsymmetric_eigenvalues;
pub use tridiagonal::{
    householder_tridiagonalize, tridiagonal_eigen, tridiagonal_eigenvalues,
    tridiagonal_inverse_iteration,
};

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type CMatrix = Matrix<Complex64>;
pub type RMatrix = Matrix<f64>;

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data }
    }

    pub fn diagonal(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn conjugate(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * *b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| *a * *b).sum())
            .collect()
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (r2, c2) = (other.rows, other.cols);
        Self::from_fn(self.rows * r2, self.cols * c2, |i, j| {
            self[(i / r2, j / c2)] * other[(i % r2, j % c2)]
        })
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| *v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a + *b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a - *b).collect(),
        }
    }

    /// Largest elementwise modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |A - A†|`, zero for Hermitian (or real symmetric) input.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).modulus());
            }
        }
        worst
    }

    /// Replaces the matrix by `(A + A†)/2`.
    pub fn hermitize(&mut self) {
        assert!(self.is_square());
        for i in 0..self.rows {
            for j in i..self.cols {
                let avg = (self[(i, j)] + self[(j, i)].conj()).scale(0.5);
                self[(i, j)] = avg;
                self[(j, i)] = avg.conj();
            }
        }
    }
}

impl RMatrix {
    pub fn to_complex(&self) -> CMatrix {
        CMatrix::from_fn(self.rows, self.cols, |i, j| Complex64::new(self[(i, j)], 0.0))
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_of_identities_is_identity() {
        let a = CMatrix::identity(2);
        let b = CMatrix::identity(3);
        assert_eq!(a.kron(&b), CMatrix::identity(6));
    }

    #[test]
    fn kron_layout() {
        let a = RMatrix::from_row_major(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let b = RMatrix::from_row_major(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        let k = a.kron(&b);
        assert_eq!(k[(0, 1)], 1.0);
        assert_eq!(k[(0, 3)], 2.0);
        assert_eq!(k[(3, 2)], 4.0);
        assert_eq!(k[(2, 1)], 3.0);
    }

    #[test]
    fn hermitize_removes_antihermitian_part() {
        let mut m = CMatrix::from_fn(3, 3, |i, j| Complex64::new(i as f64, j as f64 * 0.5));
        m.hermitize();
        assert!(m.hermiticity_residual() < 1e-15);
    }
}
