use crate::scalar::Scalar;

use super::Matrix;

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    n: usize,
    factors: Matrix<T>,
    pivots: Vec<usize>,
    sign: f64,
    /// Pivots that were exactly zero and got replaced by `perturbation`.
    pub perturbed_pivots: usize,
}

impl<T: Scalar> Lu<T> {
    /// Factorizes `a`. Exactly-zero pivots are replaced by `perturbation`,
    /// which is what inverse iteration on a singular matrix needs.
    pub fn factor_with_perturbation(a: &Matrix<T>, perturbation: f64) -> Self {
        assert!(a.is_square(), "LU needs a square matrix");
        let n = a.rows();
        let mut f = a.clone();
        let mut pivots: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut perturbed = 0;
        for k in 0..n {
            let (mut p, mut best) = (k, f[(k, k)].modulus());
            for i in (k + 1)..n {
                let v = f[(i, k)].modulus();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if p != k {
                for j in 0..n {
                    let tmp = f[(k, j)];
                    f[(k, j)] = f[(p, j)];
                    f[(p, j)] = tmp;
                }
                pivots.swap(k, p);
                sign = -sign;
            }
            if f[(k, k)].modulus() == 0.0 {
                f[(k, k)] = T::from_real(perturbation);
                perturbed += 1;
            }
            let pivot = f[(k, k)];
            for i in (k + 1)..n {
                let m = f[(i, k)] / pivot;
                if m == T::zero() {
                    continue;
                }
                f[(i, k)] = m;
                for j in (k + 1)..n {
                    let u = f[(k, j)];
                    f[(i, j)] -= m * u;
                }
            }
        }
        Self {
            n,
            factors: f,
            pivots,
            sign,
            perturbed_pivots: perturbed,
        }
    }

    pub fn factor(a: &Matrix<T>) -> Self {
        Self::factor_with_perturbation(a, 0.0)
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let f = &self.factors;
        let mut x: Vec<T> = self.pivots.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= f[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= f[(i, j)] * x[j];
            }
            x[i] = acc / f[(i, i)];
        }
        x
    }

    pub fn determinant(&self) -> T {
        let mut det = T::from_real(self.sign);
        for i in 0..self.n {
            det *= self.factors[(i, i)];
        }
        det
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{CMatrix, RMatrix};
    use num_complex::Complex64;

    #[test]
    fn solves_real_system() {
        let a = RMatrix::from_row_major(3, 3, vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0]);
        let lu = Lu::factor(&a);
        let x = lu.solve(&[3.0, 2.0, 4.0]);
        let back = a.matvec(&x);
        for (u, v) in back.iter().zip([3.0, 2.0, 4.0]) {
            assert!((u - v).abs() < 1e-14);
        }
        // det by cofactor expansion: 0*(1) - 2*(1-0) + 1*(0-3) = -5
        assert!((lu.determinant() + 5.0).abs() < 1e-14);
    }

    #[test]
    fn complex_determinant() {
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        let a = CMatrix::from_row_major(2, 2, vec![one, i, -i, one * 2.0]);
        // 1*2 - i*(-i) = 2 - 1 = 1
        let det = Lu::factor(&a).determinant();
        assert!((det - one).norm() < 1e-15);
    }
}
