use super::RMatrix;

const MAX_QL_ITERATIONS: usize = 60;

/// Householder reduction of a real symmetric matrix to tridiagonal form.
///
/// Returns `(diag, off)` with `off[i]` coupling rows `i` and `i + 1`. The
/// orthogonal transformation is not accumulated.
pub fn householder_tridiagonalize(mut a: RMatrix) -> (Vec<f64>, Vec<f64>) {
    assert!(a.is_square());
    let n = a.rows();
    if n == 0 {
        return (vec![], vec![]);
    }
    let mut e = vec![0.0; n];
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| a[(i, k)].abs()).sum();
            if scale == 0.0 {
                e[i] = a[(i, l)];
            } else {
                for k in 0..=l {
                    a[(i, k)] /= scale;
                    h += a[(i, k)] * a[(i, k)];
                }
                let f = a[(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[(i, l)] = f - g;
                let mut f = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[(j, k)] * a[(i, k)];
                    }
                    for k in (j + 1)..=l {
                        g += a[(k, j)] * a[(i, k)];
                    }
                    e[j] = g / h;
                    f += e[j] * a[(i, j)];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[(j, k)] -= f * e[k] + g * a[(i, k)];
                    }
                }
            }
        } else {
            e[i] = a[(i, l)];
        }
    }
    let diag = (0..n).map(|i| a[(i, i)]).collect();
    let off = e[1..].to_vec();
    (diag, off)
}

/// Eigenvalues (unsorted) of the symmetric tridiagonal matrix `(diag, off)`.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let mut d = diag.to_vec();
    implicit_ql(&mut d, off, None);
    d
}

/// Eigenvalues ascending with orthonormal eigenvectors as columns.
pub fn tridiagonal_eigen(diag: &[f64], off: &[f64]) -> (Vec<f64>, RMatrix) {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut z = RMatrix::identity(n);
    implicit_ql(&mut d, off, Some(&mut z));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = RMatrix::from_fn(n, n, |r, c| z[(r, order[c])]);
    (values, vectors)
}

/// QL iteration with implicit Wilkinson shifts.
fn implicit_ql(d: &mut [f64], off: &[f64], mut z: Option<&mut RMatrix>) {
    let n = d.len();
    assert_eq!(off.len() + 1, n.max(1), "off-diagonal must have n - 1 entries");
    if n <= 1 {
        return;
    }
    let mut e = off.to_vec();
    e.push(0.0);

    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            assert!(
                iterations <= MAX_QL_ITERATIONS,
                "implicit QL failed to converge"
            );
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..n {
                        let f = z[(k, i + 1)];
                        z[(k, i + 1)] = s * z[(k, i)] + c * f;
                        z[(k, i)] = c * z[(k, i)] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

/// Eigenvector of the symmetric tridiagonal matrix for the eigenvalue
/// closest to `shift`, by inverse iteration. Normalized with a positive
/// largest component.
pub fn tridiagonal_inverse_iteration(diag: &[f64], off: &[f64], shift: f64) -> Vec<f64> {
    let n = diag.len();
    if n == 1 {
        return vec![1.0];
    }
    let scale = diag
        .iter()
        .chain(off)
        .fold(0.0_f64, |a, &b| a.max(b.abs()))
        .max(1.0);
    let tiny = f64::EPSILON * scale;

    // LU with partial pivoting of T - shift·I (LAPACK gttrf layout).
    let mut dl = off.to_vec();
    let mut d: Vec<f64> = diag.iter().map(|v| v - shift).collect();
    let mut du = off.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut swapped = vec![false; n - 1];
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = tiny;
            }
            let fact = dl[i] / d[i];
            dl[i] = fact;
            d[i + 1] -= fact * du[i];
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = fact;
            let temp = du[i];
            du[i] = d[i + 1];
            d[i + 1] = temp - fact * d[i + 1];
            if i + 1 < n - 1 {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du[i + 1];
            }
            swapped[i] = true;
        }
    }
    if d[n - 1] == 0.0 {
        d[n - 1] = tiny;
    }

    let solve = |b: &mut [f64]| {
        for i in 0..n - 1 {
            if swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - dl[i] * b[i];
            } else {
                b[i + 1] -= dl[i] * b[i];
            }
        }
        b[n - 1] /= d[n - 1];
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
        }
    };

    // deterministic start without reflection symmetry
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.25 * (0.7 * i as f64 + 0.3).sin()).collect();
    for _ in 0..4 {
        solve(&mut x);
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut x {
            *v /= norm;
        }
    }
    let pivot = x
        .iter()
        .fold(0.0_f64, |a, &b| if b.abs() > a.abs() { b } else { a });
    if pivot < 0.0 {
        for v in &mut x {
            *v = -*v;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag_dense(d: &[f64], e: &[f64]) -> RMatrix {
        let n = d.len();
        RMatrix::from_fn(n, n, |i, j| {
            if i == j {
                d[i]
            } else if i + 1 == j {
                e[i]
            } else if j + 1 == i {
                e[j]
            } else {
                0.0
            }
        })
    }

    #[test]
    fn laplacian_spectrum() {
        // eigenvalues of the path-graph Laplacian-like matrix 2 - 2cos(kπ/(n+1))
        let n = 30;
        let d = vec![2.0; n];
        let e = vec![-1.0; n - 1];
        let mut vals = tridiagonal_eigenvalues(&d, &e);
        vals.sort_by(f64::total_cmp);
        for (k, v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn eigenvectors_diagonalize() {
        let d = [1.0, -3.0, 0.5, 2.0, 7.0];
        let e = [0.3, 1.2, -0.7, 0.01];
        let (vals, vecs) = tridiagonal_eigen(&d, &e);
        let t = tridiag_dense(&d, &e);
        let back = vecs.transpose().matmul(&t).matmul(&vecs);
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { vals[i] } else { 0.0 };
                assert!((back[(i, j)] - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn inverse_iteration_recovers_lowest_vector() {
        let d = [1.0, -3.0, 0.5, 2.0, 7.0, 0.0];
        let e = [0.3, 1.2, -0.7, 0.01, 2.0];
        let (vals, vecs) = tridiagonal_eigen(&d, &e);
        let x = tridiagonal_inverse_iteration(&d, &e, vals[0]);
        let dotp: f64 = (0..6).map(|i| x[i] * vecs[(i, 0)]).sum();
        assert!((dotp.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn householder_preserves_spectrum() {
        let a = RMatrix::from_fn(7, 7, |i, j| ((i * 7 + j) as f64).sin() + ((j * 7 + i) as f64).sin());
        let (d, e) = householder_tridiagonalize(a.clone());
        let mut tri = tridiagonal_eigenvalues(&d, &e);
        tri.sort_by(f64::total_cmp);
        let (mut direct, _) = {
            let c = a.to_complex();
            let eig = super::super::hermitian_eigen(&c);
            (eig.values, ())
        };
        direct.sort_by(f64::total_cmp);
        for (x, y) in tri.iter().zip(&direct) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
