use num_complex::Complex64;

use super::tridiagonal::{householder_tridiagonalize, tridiagonal_eigenvalues};
use super::{CMatrix, RMatrix};

/// Above this dimension eigenvalues come from Householder reduction + implicit QL.
pub const JACOBI_MAX_DIM: usize = 64;

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
///
/// `vectors` holds the eigenvectors as columns, so `A = V diag(values) V†`.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

/// Full eigen-decomposition by cyclic complex Jacobi rotations.
///
/// The input is read as Hermitian: only its Hermitian part contributes.
pub fn hermitian_eigen(a: &CMatrix) -> HermitianEigen {
    assert!(a.is_square(), "eigen-decomposition needs a square matrix");
    let n = a.rows();
    let mut m = a.clone();
    m.hermitize();
    let mut v = CMatrix::identity(n);

    let scale = m.frobenius_norm();
    if scale == 0.0 {
        return HermitianEigen {
            values: vec![0.0; n],
            vectors: v,
        };
    }
    let threshold = (f64::EPSILON * scale).powi(2);

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let b = m[(p, q)];
                let abs_b = b.norm();
                if abs_b <= f64::MIN_POSITIVE {
                    continue;
                }
                let phase = b / abs_b;
                let phase_conj = phase.conj();
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                // tan θ = t, chosen with |θ| ≤ π/4
                let tau = (aqq - app) / (2.0 * abs_b);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = akp * c - akq * phase_conj * s;
                    m[(k, q)] = akp * s + akq * phase_conj * c;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = apk * c - aqk * phase * s;
                    m[(q, k)] = apk * s + aqk * phase * c;
                }
                m[(p, q)] = Complex64::new(0.0, 0.0);
                m[(q, p)] = Complex64::new(0.0, 0.0);
                m[(p, p)] = Complex64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = Complex64::new(m[(q, q)].re, 0.0);

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * phase_conj * s;
                    v[(k, q)] = vkp * s + vkq * phase_conj * c;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    HermitianEigen { values, vectors }
}

/// Eigenvalues of a Hermitian matrix, ascending.
///
/// Jacobi up to [`JACOBI_MAX_DIM`]; above it the matrix is embedded as the real
/// symmetric `[[Re A, -Im A], [Im A, Re A]]`, whose spectrum is that of `A`
/// with every eigenvalue doubled, and reduced to tridiagonal form.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let n = a.rows();
    if n <= JACOBI_MAX_DIM {
        return hermitian_eigen(a).values;
    }
    let mut h = a.clone();
    h.hermitize();
    let emb = RMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let (diag, off) = householder_tridiagonalize(emb);
    let mut doubled = tridiagonal_eigenvalues(&diag, &off);
    doubled.sort_by(f64::total_cmp);
    doubled.iter().step_by(2).copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let mut m = CMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        m.hermitize();
        m
    }

    #[test]
    fn reconstructs_random_hermitian() {
        for (n, seed) in [(1, 1), (2, 2), (5, 3), (12, 4)] {
            let a = random_hermitian(n, seed);
            let eig = hermitian_eigen(&a);
            let lam = CMatrix::diagonal(
                &eig.values.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>(),
            );
            let back = eig.vectors.matmul(&lam).matmul(&eig.vectors.adjoint());
            assert!(back.sub(&a).max_abs() < 1e-12, "n = {n}");
            let unit = eig.vectors.adjoint().matmul(&eig.vectors);
            assert!(unit.sub(&CMatrix::identity(n)).max_abs() < 1e-12);
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn pauli_y_spectrum() {
        let sy = CMatrix::from_row_major(
            2,
            2,
            vec![
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        let vals = hermitian_eigen(&sy).values;
        assert!((vals[0] + 1.0).abs() < 1e-15);
        assert!((vals[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn large_path_matches_jacobi() {
        let a = random_hermitian(80, 7);
        let fast = hermitian_eigenvalues(&a);
        let slow = hermitian_eigen(&a).values;
        assert_eq!(fast.len(), 80);
        for (x, y) in fast.iter().zip(&slow) {
            assert!((x - y).abs() < 1e-11, "{x} vs {y}");
        }
    }
}
