use std::f64::consts::LN_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};

use super::*;
use crate::dicke::{assemble_liouvillian, DickeLayout, DickeState};
use crate::krylov::LinearOperator;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn params(coupling: f64, field: f64, gc: f64, gl: f64) -> LmgParams {
    LmgParams::new(coupling, field, gc, gl).unwrap()
}

fn pure(v: &[Complex64]) -> CMatrix {
    CMatrix::from_fn(v.len(), v.len(), |a, b| v[a] * v[b].conj())
}

#[test]
fn single_unit_pumping_gives_the_upper_level() {
    let s = brute_force_steady_state(&params(0.0, 0.0, 0.0, 1.0), 1).unwrap();
    let want = CMatrix::from_row_major(2, 2, vec![c(1.0), c(0.0), c(0.0), c(0.0)]);
    assert!(s.matrix().sub(&want).max_abs() < 1e-12);
    s.validate().unwrap();
}

#[test]
fn mutual_information_examples() {
    let up = CMatrix::from_row_major(2, 2, vec![c(0.7), Complex64::new(0.1, 0.2), Complex64::new(0.1, -0.2), c(0.3)]);
    let product = FullState::new(3, up.kron(&up).kron(&up)).unwrap();
    assert!(brute_force_mutual_info(&product).abs() < 1e-12);

    let s = std::f64::consts::FRAC_1_SQRT_2;
    let dicke = FullState::new(2, pure(&[c(0.0), c(s), c(s), c(0.0)])).unwrap();
    assert!((brute_force_mutual_info(&dicke) - LN_2).abs() < 1e-12);
    assert!(dicke.entropy().abs() < 1e-12);
    for i in 0..2 {
        assert!(dicke.partial_trace(i).sub(&CMatrix::identity(2).scaled(c(0.5))).max_abs() < 1e-15);
    }

    let mixed = FullState::new(2, CMatrix::identity(4).scaled(c(0.25))).unwrap();
    assert!((mixed.entropy() - 2.0 * LN_2).abs() < 1e-12);
}

#[test]
fn partial_trace_picks_the_right_factor() {
    let a = CMatrix::from_row_major(2, 2, vec![c(0.9), c(0.0), c(0.0), c(0.1)]);
    let b = CMatrix::identity(2).scaled(c(0.5));
    let rho = FullState::new(2, a.kron(&b)).unwrap();
    assert!(rho.partial_trace(0).sub(&a).max_abs() < 1e-15);
    assert!(rho.partial_trace(1).sub(&b).max_abs() < 1e-15);
    assert!(rho.permutation_residual() > 0.1);
}

#[test]
fn oracle_states_satisfy_their_invariants() {
    for p in [params(3.0, 0.5, 2.0, 1.0), params(3.0, 0.0, 0.5, 1.0), params(-2.0, 1.0, 0.0, 0.3)] {
        for n in 1..=4 {
            let s = brute_force_steady_state(&p, n).unwrap();
            s.validate().unwrap();
            assert!(s.permutation_residual() < 1e-10);
            let l = full_liouvillian(&p, n).unwrap();
            let d = 1 << n;
            let v: Vec<Complex64> = (0..d * d).map(|k| s.matrix()[(k % d, k / d)]).collect();
            assert!(norm(&l.matvec(&v)) < 1e-10 * l.frobenius_norm());
        }
    }
}

#[test]
fn degenerate_generator_is_rejected() {
    let zero = CMatrix::zeros(4, 4);
    assert!(matches!(stationary_state(&zero, 2), Err(Error::NonUniqueNullSpace { .. })));
    // two units evolving independently under pure dephasing keep every diagonal state
    let z = CMatrix::from_row_major(2, 2, vec![c(1.0), c(0.0), c(0.0), c(-1.0)]);
    let l = lindblad_generator(&CMatrix::zeros(2, 2), &[z]);
    assert!(matches!(stationary_state(&l, 2), Err(Error::NonUniqueNullSpace { .. })));
    assert!(brute_force_steady_state(&params(1.0, 0.0, 1.0, 1.0), 5).is_err());
}

#[test]
fn coupled_basis_is_orthonormal() {
    for n in 1..=4 {
        let basis = coupled_basis(n).unwrap();
        let all = basis.iter().fold(CMatrix::zeros(1 << n, 0), |acc, b| {
            CMatrix::from_fn(1 << n, acc.cols() + b.cols(), |r, k| if k < acc.cols() { acc[(r, k)] } else { b[(r, k - acc.cols())] })
        });
        assert_eq!(all.cols(), 1 << n);
        let gram = all.adjoint().matmul(&all);
        assert!(gram.sub(&CMatrix::identity(1 << n)).max_abs() < 1e-12, "N = {n}");
    }
}

#[test]
fn embedding_round_trips() {
    let mixed = embed(&DickeState::maximally_mixed(3).unwrap()).unwrap();
    assert!(mixed.matrix().sub(&CMatrix::identity(8).scaled(c(0.125))).max_abs() < 1e-14);
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    for n in 1..=4 {
        let layout = DickeLayout::new(n).unwrap();
        let x: Vec<Complex64> = (0..layout.dim()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let s = DickeState::from_vector(layout, &x).unwrap();
        let back = project(&embed(&s).unwrap()).unwrap();
        let diff = s.to_vector().iter().zip(back.to_vector()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "N = {n}: {diff:e}");
    }
}

#[test]
fn sector_generator_matches_full_generator() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(5);
    for (n, p) in [(4usize, params(3.0, 0.5, 2.0, 1.0)), (3, params(-1.0, 0.3, 0.7, 0.4)), (2, params(2.0, 0.0, 1.0, 2.0))] {
        let op = assemble_liouvillian(&p, n).unwrap();
        let layout = op.layout().clone();
        let mut x = vec![c(0.0); layout.dim()];
        for s in layout.sectors() {
            let k = s.size();
            for a in 0..k {
                x[s.offset + a * k + a] = c(rng.gen_range(-1.0..1.0));
                for b in (a + 1)..k {
                    let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    x[s.offset + a * k + b] = v;
                    x[s.offset + b * k + a] = v.conj();
                }
            }
        }
        let mut y = vec![c(0.0); layout.dim()];
        op.apply(&x, &mut y);

        let full = embed(&DickeState::from_vector(layout.clone(), &x).unwrap()).unwrap();
        let d = 1 << n;
        let v: Vec<Complex64> = (0..d * d).map(|k| full.matrix()[(k % d, k / d)]).collect();
        let lv = full_liouvillian(&p, n).unwrap().matvec(&v);
        let out = FullState::new(n, CMatrix::from_fn(d, d, |r, col| lv[col * d + r])).unwrap();
        let projected = project(&out).unwrap().to_vector();
        let diff = y.iter().zip(&projected).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "N = {n}: {diff:e}");
    }
}

#[test]
fn sector_solver_matches_brute_force() {
    let sets = [
        params(3.0, 0.5, 2.0, 1.0),
        params(3.0, 0.0, 0.5, 1.0),
        params(3.0, 0.0, 2.0, 1.0),
        params(3.0, 0.5, 0.0, 1.0),
        params(-1.5, 1.2, 3.0, 0.4),
    ];
    for p in sets {
        for n in 1..=4 {
            let cmp = compare_with_oracle(&p, n).unwrap();
            assert!(cmp.passes(1e-8), "{p:?} N = {n}: {cmp:?}");
            assert_eq!(cmp.diagonal_deviation.is_some(), p.field == 0.0);
        }
    }
}
