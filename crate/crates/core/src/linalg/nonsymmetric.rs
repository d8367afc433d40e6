use num_complex::Complex64;

use super::RMatrix;

const MAX_ITERATIONS_PER_EIGENVALUE: usize = 60;

/// Eigenvalues of a general real square matrix.
///
/// Balancing, reduction to upper Hessenberg form by stabilized elementary
/// similarity transforms, then the Francis double-shift QR iteration.
/// Complex eigenvalues come in conjugate pairs. The order is unspecified.
pub fn eigenvalues(a: &RMatrix) -> Vec<Complex64> {
    assert!(a.is_square(), "eigenvalues need a square matrix");
    let n = a.rows();
    let mut h = a.clone();
    balance(&mut h);
    reduce_to_hessenberg(&mut h);
    for i in 0..n {
        for j in 0..i.saturating_sub(1) {
            h[(i, j)] = 0.0;
        }
    }
    hessenberg_qr(&mut h)
}

/// Diagonal similarity scaling by powers of two so rows and columns have
/// comparable norms.
fn balance(a: &mut RMatrix) {
    const RADIX: f64 = 2.0;
    let n = a.rows();
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[(i, j)] *= g;
                    }
                    for j in 0..n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
    }
}

fn reduce_to_hessenberg(a: &mut RMatrix) {
    let n = a.rows();
    for m in 1..n.saturating_sub(1) {
        let mut x: f64 = 0.0;
        let mut i = m;
        for j in m..n {
            if a[(j, m - 1)].abs() > x.abs() {
                x = a[(j, m - 1)];
                i = j;
            }
        }
        if i != m {
            for j in (m - 1)..n {
                let t = a[(i, j)];
                a[(i, j)] = a[(m, j)];
                a[(m, j)] = t;
            }
            for j in 0..n {
                let t = a[(j, i)];
                a[(j, i)] = a[(j, m)];
                a[(j, m)] = t;
            }
        }
        if x != 0.0 {
            for i in (m + 1)..n {
                let mut y = a[(i, m - 1)];
                if y != 0.0 {
                    y /= x;
                    a[(i, m - 1)] = y;
                    for j in m..n {
                        a[(i, j)] -= y * a[(m, j)];
                    }
                    for j in 0..n {
                        a[(j, m)] += y * a[(j, i)];
                    }
                }
            }
        }
    }
}

fn hessenberg_qr(a: &mut RMatrix) -> Vec<Complex64> {
    let n = a.rows();
    let mut wri = vec![Complex64::new(0.0, 0.0); n];
    if n == 0 {
        return wri;
    }
    let idx = |i: isize, j: isize| (i as usize, j as usize);
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }
    let eps = f64::EPSILON;
    let mut nn: isize = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        let mut l: isize;
        loop {
            l = nn;
            while l > 0 {
                let mut s = a[idx(l - 1, l - 1)].abs() + a[idx(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[idx(l, l - 1)].abs() <= eps * s {
                    a[idx(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[idx(nn, nn)];
            if l == nn {
                wri[nn as usize] = Complex64::new(x + t, 0.0);
                nn -= 1;
            } else {
                let mut y = a[idx(nn - 1, nn - 1)];
                let mut w = a[idx(nn, nn - 1)] * a[idx(nn - 1, nn)];
                if l == nn - 1 {
                    let p = 0.5 * (y - x);
                    let q = p * p + w;
                    let mut z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + z.copysign(p);
                        wri[(nn - 1) as usize] = Complex64::new(x + z, 0.0);
                        wri[nn as usize] = Complex64::new(x + z, 0.0);
                        if z != 0.0 {
                            wri[nn as usize] = Complex64::new(x - w / z, 0.0);
                        }
                    } else {
                        wri[(nn - 1) as usize] = Complex64::new(x + p, -z);
                        wri[nn as usize] = Complex64::new(x + p, z);
                    }
                    nn -= 2;
                } else {
                    assert!(
                        its < MAX_ITERATIONS_PER_EIGENVALUE,
                        "Hessenberg QR failed to converge"
                    );
                    if its == 10 || its == 20 {
                        // exceptional shift
                        t += x;
                        for i in 0..=nn {
                            a[idx(i, i)] -= x;
                        }
                        let s = a[idx(nn, nn - 1)].abs() + a[idx(nn - 1, nn - 2)].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let (mut p, mut q, mut r, mut z);
                    let mut m = nn - 2;
                    loop {
                        z = a[idx(m, m)];
                        r = x - z;
                        let s = y - z;
                        p = (r * s - w) / a[idx(m + 1, m)] + a[idx(m, m + 1)];
                        q = a[idx(m + 1, m + 1)] - z - r - s;
                        r = a[idx(m + 2, m + 1)];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a[idx(m, m - 1)].abs() * (q.abs() + r.abs());
                        let v = p.abs()
                            * (a[idx(m - 1, m - 1)].abs() + z.abs() + a[idx(m + 1, m + 1)].abs());
                        if u <= eps * v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m..(nn - 1) {
                        a[idx(i + 2, i)] = 0.0;
                        if i != m {
                            a[idx(i + 2, i - 1)] = 0.0;
                        }
                    }
                    let mut k = m;
                    while k < nn {
                        if k != m {
                            p = a[idx(k, k - 1)];
                            q = a[idx(k + 1, k - 1)];
                            r = 0.0;
                            if k + 1 != nn {
                                r = a[idx(k + 2, k - 1)];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = (p * p + q * q + r * r).sqrt().copysign(p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    a[idx(k, k - 1)] = -a[idx(k, k - 1)];
                                }
                            } else {
                                a[idx(k, k - 1)] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                let mut pp = a[idx(k, j)] + q * a[idx(k + 1, j)];
                                if k + 1 != nn {
                                    pp += r * a[idx(k + 2, j)];
                                    a[idx(k + 2, j)] -= pp * z;
                                }
                                a[idx(k + 1, j)] -= pp * y;
                                a[idx(k, j)] -= pp * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                let mut pp = x * a[idx(i, k)] + y * a[idx(i, k + 1)];
                                if k + 1 != nn {
                                    pp += z * a[idx(i, k + 2)];
                                    a[idx(i, k + 2)] -= pp * r;
                                }
                                a[idx(i, k + 1)] -= pp * q;
                                a[idx(i, k)] -= pp;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if l + 1 >= nn {
                break;
            }
        }
    }
    wri
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{CMatrix, Lu};

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn companion_matrix_roots() {
        // (x-1)(x-2)(x-3) = x^3 - 6x^2 + 11x - 6
        let a = RMatrix::from_row_major(3, 3, vec![6.0, -11.0, 6.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let ev = sorted(eigenvalues(&a));
        for (e, want) in ev.iter().zip([1.0, 2.0, 3.0]) {
            assert!((e.re - want).abs() < 1e-12 && e.im.abs() < 1e-12, "{e}");
        }
    }

    #[test]
    fn rotation_has_unit_modulus_pair() {
        let th: f64 = 0.7;
        let a = RMatrix::from_row_major(
            3,
            3,
            vec![th.cos(), -th.sin(), 0.0, th.sin(), th.cos(), 0.0, 0.0, 0.0, 0.25],
        );
        let ev = sorted(eigenvalues(&a));
        assert!((ev[0] - Complex64::new(0.25, 0.0)).norm() < 1e-14);
        assert!((ev[1] - Complex64::new(th.cos(), -th.sin())).norm() < 1e-14);
        assert!((ev[2] - Complex64::new(th.cos(), th.sin())).norm() < 1e-14);
    }

    #[test]
    fn eigenvalues_zero_characteristic_polynomial() {
        let n = 6;
        let a = RMatrix::from_fn(n, n, |i, j| ((3 * i + 5 * j) as f64 * 0.37).sin() * 2.0);
        let ev = eigenvalues(&a);
        assert_eq!(ev.len(), n);
        let ac = a.to_complex();
        for lam in ev {
            let shifted = ac.sub(&CMatrix::identity(n).scaled(lam));
            let det = Lu::factor(&shifted).determinant();
            assert!(det.norm() < 1e-9, "det(A - {lam}) = {det}");
        }
        // sum of eigenvalues equals the trace
        let tr: f64 = (0..n).map(|i| a[(i, i)]).sum();
        let s: Complex64 = eigenvalues(&a).iter().sum();
        assert!((s.re - tr).abs() < 1e-12 && s.im.abs() < 1e-12);
    }

    #[test]
    fn one_by_one_and_empty() {
        assert_eq!(eigenvalues(&RMatrix::zeros(0, 0)), vec![]);
        let ev = eigenvalues(&RMatrix::from_row_major(1, 1, vec![-2.5]));
        assert_eq!(ev, vec![Complex64::new(-2.5, 0.0)]);
    }
}
