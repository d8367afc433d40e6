//! Conjugate gradient on the normal equations (CGLS) for least-squares
//! problems `min ‖A x - b‖`, with diagonal right preconditioning.

use crate::scalar::{dot, norm, Scalar};

/// Operator with products by itself and its adjoint.
pub trait LinearOperator<T>: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `y = A x`
    fn apply(&self, x: &[T], y: &mut [T]);
    /// `x = A† y`
    fn apply_adjoint(&self, y: &[T], x: &mut [T]);
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CglsOptions {
    pub max_iterations: usize,
    /// Recompute the residual from scratch every this many iterations.
    pub refresh: usize,
}

impl Default for CglsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            refresh: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CglsOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves `min ‖A x - b‖` from `x0`. `scale[j]` multiplies column `j`
/// (right preconditioner). `done(residual, x)` is consulted after every
/// iteration with the current `b - A x`.
pub fn cgls<T, A, F>(
    op: &A,
    b: &[T],
    x0: Vec<T>,
    scale: &[f64],
    opts: &CglsOptions,
    mut done: F,
) -> CglsOutcome<T>
where
    T: Scalar,
    A: LinearOperator<T> + ?Sized,
    F: FnMut(&[T], &[T]) -> bool,
{
    let (m, n) = (op.nrows(), op.ncols());
    assert_eq!(b.len(), m);
    assert_eq!(x0.len(), n);
    assert_eq!(scale.len(), n);
    let mut x = x0;
    let mut r = vec![T::zero(); m];
    let residual = |x: &[T], r: &mut [T]| {
        op.apply(x, r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = *bi - *ri;
        }
    };
    residual(&x, &mut r);
    if done(&r, &x) {
        return CglsOutcome {
            x,
            iterations: 0,
            converged: true,
        };
    }
    let mut s = vec![T::zero(); n];
    let precondition = |v: &mut [T]| {
        for (vi, si) in v.iter_mut().zip(scale) {
            *vi = vi.scale(*si);
        }
    };
    op.apply_adjoint(&r, &mut s);
    precondition(&mut s);
    let mut p = s.clone();
    let mut gamma = dot(&s, &s).re();
    let mut sp = vec![T::zero(); n];
    let mut q = vec![T::zero(); m];
    for it in 1..=opts.max_iterations {
        if gamma == 0.0 {
            return CglsOutcome {
                x,
                iterations: it - 1,
                converged: false,
            };
        }
        for ((o, pi), si) in sp.iter_mut().zip(&p).zip(scale) {
            *o = pi.scale(*si);
        }
        op.apply(&sp, &mut q);
        let qq = dot(&q, &q).re();
        if qq == 0.0 {
            return CglsOutcome {
                x,
                iterations: it - 1,
                converged: false,
            };
        }
        let alpha = gamma / qq;
        for (xi, v) in x.iter_mut().zip(&sp) {
            *xi = *xi + v.scale(alpha);
        }
        if it % opts.refresh == 0 {
            residual(&x, &mut r);
        } else {
            for (ri, qi) in r.iter_mut().zip(&q) {
                *ri = *ri - qi.scale(alpha);
            }
        }
        if done(&r, &x) {
            return CglsOutcome {
                x,
                iterations: it,
                converged: true,
            };
        }
        op.apply_adjoint(&r, &mut s);
        precondition(&mut s);
        let gamma_new = dot(&s, &s).re();
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = *si + pi.scale(beta);
        }
    }
    CglsOutcome {
        x,
        iterations: opts.max_iterations,
        converged: false,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖b - A x‖ / ‖b‖` at exit.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Restarted GMRES with right preconditioning `A M⁻¹ u = b`, `x = M⁻¹ u`.
/// `precondition(r, z)` computes `z = M⁻¹ r`.
pub fn gmres<A, P>(
    op: &A,
    b: &[f64],
    x0: Vec<f64>,
    precondition: P,
    restart: usize,
    max_iterations: usize,
    tol: f64,
) -> GmresOutcome
where
    A: LinearOperator<f64> + ?Sized,
    P: Fn(&[f64], &mut [f64]),
{
    let n = op.ncols();
    let bnorm = norm(b).max(f64::MIN_POSITIVE);
    let mut x = x0;
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut total = 0;
    while total < max_iterations {
        op.apply(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let beta = norm(&r);
        let rel = beta / bnorm;
        if rel <= tol {
            return GmresOutcome {
                x,
                iterations: total,
                relative_residual: rel,
                converged: true,
            };
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h: Vec<Vec<f64>> = Vec::new();
        let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
        let mut g = vec![beta];
        let mut k = 0;
        while k < restart && total < max_iterations {
            precondition(&basis[k], &mut z);
            op.apply(&z, &mut w);
            // modified Gram-Schmidt
            let mut col = Vec::with_capacity(k + 2);
            for v in &basis {
                let hij: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= hij * vi;
                }
                col.push(hij);
            }
            let hn = norm(&w);
            col.push(hn);
            for i in 0..k {
                let (a, c) = (col[i], col[i + 1]);
                col[i] = cs[i] * a + sn[i] * c;
                col[i + 1] = -sn[i] * a + cs[i] * c;
            }
            let (a, c) = (col[k], col[k + 1]);
            let rho = a.hypot(c);
            let (ck, sk) = if rho == 0.0 { (1.0, 0.0) } else { (a / rho, c / rho) };
            cs.push(ck);
            sn.push(sk);
            col[k] = rho;
            col[k + 1] = 0.0;
            g.push(-sk * g[k]);
            g[k] *= ck;
            h.push(col);
            k += 1;
            total += 1;
            if g[k].abs() / bnorm <= tol || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for j in (i + 1)..k {
                acc -= h[j][i] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (v, yi) in basis.iter().zip(&y) {
            for (u, vi) in update.iter_mut().zip(v) {
                *u += yi * vi;
            }
        }
        precondition(&update, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
    }
    op.apply(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let final_rel = norm(&r) / bnorm;
    GmresOutcome {
        x,
        iterations: total,
        relative_residual: final_rel,
        converged: final_rel <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Dense {
        rows: usize,
        cols: usize,
        a: Vec<f64>,
    }

    impl LinearOperator<f64> for Dense {
        fn nrows(&self) -> usize {
            self.rows
        }
        fn ncols(&self) -> usize {
            self.cols
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            for i in 0..self.rows {
                y[i] = (0..self.cols).map(|j| self.a[i * self.cols + j] * x[j]).sum();
            }
        }
        fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
            for j in 0..self.cols {
                x[j] = (0..self.rows).map(|i| self.a[i * self.cols + j] * y[i]).sum();
            }
        }
    }

    #[test]
    fn overdetermined_least_squares() {
        // fit y = c0 + c1 t through (0,1), (1,3), (2,5), (3,7.5)
        let op = Dense {
            rows: 4,
            cols: 2,
            a: vec![1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0],
        };
        let b = [1.0, 3.0, 5.0, 7.5];
        let mut last = f64::INFINITY;
        let out = cgls(&op, &b, vec![0.0; 2], &[1.0, 1.0], &CglsOptions::default(), |r, _| {
            let n = norm(r);
            let stalled = (last - n).abs() < 1e-14;
            last = n;
            stalled
        });
        // normal equations: [[4, 6], [6, 14]] c = [16.5, 35.5]
        assert!((out.x[0] - 0.9).abs() < 1e-10, "{:?}", out.x);
        assert!((out.x[1] - 2.15).abs() < 1e-10);
    }

    #[test]
    fn scaled_square_system() {
        let op = Dense {
            rows: 3,
            cols: 3,
            a: vec![1e3, 1.0, 0.0, 1.0, 2.0, 0.5, 0.0, 0.5, 1e-2],
        };
        let want = [1.0, -2.0, 3.0];
        let mut b = [0.0; 3];
        op.apply(&want, &mut b);
        let scale = [1e-3, 1.0 / 2.3, 1.0 / 0.5];
        let out = cgls(&op, &b, vec![0.0; 3], &scale, &CglsOptions::default(), |r, _| norm(r) < 1e-13);
        assert!(out.converged);
        for (x, w) in out.x.iter().zip(want) {
            assert!((x - w).abs() < 1e-9);
        }
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let n = 40;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 3.0;
            if i + 1 < n {
                a[i * n + i + 1] = -1.2;
            }
            if i > 1 {
                a[i * n + i - 2] = 0.7;
            }
        }
        let op = Dense { rows: n, cols: n, a };
        let want: Vec<f64> = (0..n).map(|i| (0.3 * i as f64).cos()).collect();
        let mut b = vec![0.0; n];
        op.apply(&want, &mut b);
        let out = gmres(&op, &b, vec![0.0; n], |r, z| z.copy_from_slice(r), 7, 500, 1e-13);
        assert!(out.converged, "{}", out.relative_residual);
        for (x, w) in out.x.iter().zip(&want) {
            assert!((x - w).abs() < 1e-11);
        }
    }
}
