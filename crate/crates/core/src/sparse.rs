//! Compressed sparse row matrices.

use rayon::prelude::*;

use crate::scalar::Scalar;

/// Rows per parallel task in matrix-vector products.
const ROW_CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct Csr<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> Csr<T> {
    /// Builds a matrix row by row; `row(i, push)` calls `push(col, value)`
    /// once per stored entry.
    pub fn from_rows<F>(nrows: usize, ncols: usize, mut row: F) -> Self
    where
        F: FnMut(usize, &mut dyn FnMut(usize, T)),
    {
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..nrows {
            let start = col_idx.len();
            row(i, &mut |c, v| {
                debug_assert!(c < ncols);
                col_idx.push(c);
                values.push(v);
            });
            // keep each row sorted for deterministic products
            let mut pairs: Vec<(usize, T)> = col_idx[start..]
                .iter()
                .copied()
                .zip(values[start..].iter().copied())
                .collect();
            pairs.sort_by_key(|p| p.0);
            for (k, (c, v)) in pairs.into_iter().enumerate() {
                col_idx[start + k] = c;
                values[start + k] = v;
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        y.par_chunks_mut(ROW_CHUNK)
            .enumerate()
            .for_each(|(chunk, out)| {
                let base = chunk * ROW_CHUNK;
                for (k, yi) in out.iter_mut().enumerate() {
                    let i = base + k;
                    let mut acc = T::zero();
                    for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                        acc = acc + self.values[p] * x[self.col_idx[p]];
                    }
                    *yi = acc;
                }
            });
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for i in 0..self.nrows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.col_idx[p];
                let slot = next[c];
                col_idx[slot] = i;
                values[slot] = self.values[p].conj();
                next[c] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// `Σ_i |A_ij|²` for every column `j`.
    pub fn column_norms_sq(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (c, v) in self.col_idx.iter().zip(&self.values) {
            out[*c] += v.norm_sqr();
        }
        out
    }

    /// Approximate heap footprint in bytes.
    pub fn memory_bytes(&self) -> usize {
        self.values.len() * (std::mem::size_of::<T>() + std::mem::size_of::<usize>())
            + self.row_ptr.len() * std::mem::size_of::<usize>()
    }
}

/// Incomplete LU factorization without fill, `A ≈ L U` on the pattern of `A`
/// (`L` unit lower triangular). Every row must store its diagonal.
#[derive(Clone, Debug)]
pub struct Ilu0 {
    factors: Csr<f64>,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &Csr<f64>) -> Option<Self> {
        let n = a.nrows;
        let mut f = a.clone();
        let mut diag = vec![usize::MAX; n];
        for (i, d) in diag.iter_mut().enumerate() {
            for p in f.row_ptr[i]..f.row_ptr[i + 1] {
                if f.col_idx[p] == i {
                    *d = p;
                }
            }
            if *d == usize::MAX {
                return None;
            }
        }
        let mut slot = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (f.row_ptr[i], f.row_ptr[i + 1]);
            for p in start..end {
                slot[f.col_idx[p]] = p;
            }
            for p in start..end {
                let k = f.col_idx[p];
                if k >= i {
                    break;
                }
                let pivot = f.values[diag[k]];
                if pivot == 0.0 {
                    return None;
                }
                let m = f.values[p] / pivot;
                f.values[p] = m;
                for q in (diag[k] + 1)..f.row_ptr[k + 1] {
                    let target = slot[f.col_idx[q]];
                    if target != usize::MAX {
                        f.values[target] -= m * f.values[q];
                    }
                }
            }
            for p in start..end {
                slot[f.col_idx[p]] = usize::MAX;
            }
            if f.values[diag[i]] == 0.0 {
                return None;
            }
        }
        Some(Self { factors: f, diag })
    }

    /// `z = (L U)⁻¹ r`.
    pub fn solve(&self, r: &[f64], z: &mut [f64]) {
        let f = &self.factors;
        let n = f.nrows;
        for i in 0..n {
            let mut acc = r[i];
            for p in f.row_ptr[i]..self.diag[i] {
                acc -= f.values[p] * z[f.col_idx[p]];
            }
            z[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = z[i];
            for p in (self.diag[i] + 1)..f.row_ptr[i + 1] {
                acc -= f.values[p] * z[f.col_idx[p]];
            }
            z[i] = acc / f.values[self.diag[i]];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn sample() -> Csr<Complex64> {
        // [[1, 0, 2i], [0, 3, 0]]
        Csr::from_rows(2, 3, |i, push| match i {
            0 => {
                push(2, Complex64::new(0.0, 2.0));
                push(0, Complex64::new(1.0, 0.0));
            }
            _ => push(1, Complex64::new(3.0, 0.0)),
        })
    }

    #[test]
    fn product_and_adjoint() {
        let a = sample();
        assert_eq!(a.nnz(), 3);
        let x = [Complex64::new(1.0, 0.0), Complex64::new(1.0, 1.0), Complex64::new(0.0, 1.0)];
        let mut y = [Complex64::default(); 2];
        a.matvec(&x, &mut y);
        assert_eq!(y[0], Complex64::new(-1.0, 0.0));
        assert_eq!(y[1], Complex64::new(3.0, 3.0));
        let ah = a.adjoint();
        assert_eq!((ah.nrows(), ah.ncols()), (3, 2));
        let row2: Vec<_> = ah.row(2).collect();
        assert_eq!(row2, vec![(0, Complex64::new(0.0, -2.0))]);
        assert_eq!(a.column_norms_sq(), vec![1.0, 9.0, 4.0]);
        let row0: Vec<usize> = a.row(0).map(|e| e.0).collect();
        assert_eq!(row0, vec![0, 2]);
    }

    #[test]
    fn ilu_is_exact_for_tridiagonal_matrices() {
        let n = 6;
        let a = Csr::from_rows(n, n, |i, push| {
            push(i, 4.0 + i as f64);
            if i > 0 {
                push(i - 1, -1.0);
            }
            if i + 1 < n {
                push(i + 1, -2.0);
            }
        });
        let ilu = Ilu0::new(&a).unwrap();
        let want: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b = vec![0.0; n];
        a.matvec(&want, &mut b);
        let mut z = vec![0.0; n];
        ilu.solve(&b, &mut z);
        for (u, v) in z.iter().zip(&want) {
            assert!((u - v).abs() < 1e-14);
        }
        let missing = Csr::from_rows(2, 2, |i, push| push(1 - i, 1.0));
        assert!(Ilu0::new(&missing).is_none());
    }
}
