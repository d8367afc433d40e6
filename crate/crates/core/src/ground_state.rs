//! Ground state of the ferromagnetic LMG Hamiltonian
//! `H = 𝒥(Ĵx² + Ĵy²)/N + hĴx` in the symmetric sector `J = N/2`, and its
//! single-unit entropy (the total state is pure, so `I_M/N = S(ρ_i)`).

use crate::dicke::raising;
use crate::error::{Error, Result};
use crate::linalg::{tridiagonal_eigenvalues, tridiagonal_inverse_iteration};
use crate::state_space::binary_entropy;

/// Relative gap below which the ground state counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GroundStateResult {
    pub energy: f64,
    /// `2⟨g|Ĵ_α|g⟩/N`.
    pub magnetization: [f64; 3],
    pub mutual_info_per_unit: f64,
    /// Distance to the first excited level.
    pub gap: f64,
}

/// `(diagonal, off-diagonal)` of `H` in the `Ĵz` basis `m = -J, …, J`,
/// where `Ĵx² + Ĵy² = Ĵ² - Ĵz²` is diagonal and `Ĵx` is tridiagonal.
pub fn lmg_hamiltonian(coupling: f64, field: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let j = n as f64 / 2.0;
    let nf = n as f64;
    let m = |a: usize| a as f64 - j;
    let diag = (0..=n).map(|a| coupling * (j * (j + 1.0) - m(a) * m(a)) / nf).collect();
    let off = (0..n).map(|a| 0.5 * field * raising(j, m(a))).collect();
    (diag, off)
}

pub fn ground_state_mutual_info(coupling: f64, field: f64, n: usize) -> Result<GroundStateResult> {
    if !(coupling < 0.0) || !field.is_finite() || !coupling.is_finite() {
        return Err(Error::InvalidParams(format!(
            "ground states need a finite ferromagnetic coupling 𝒥 < 0 and finite field, got 𝒥 = {coupling}, h = {field}"
        )));
    }
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidParams(format!("ground states need an even unit count N ≥ 2, got {n}")));
    }
    let (diag, off) = lmg_hamiltonian(coupling, field, n);
    let mut levels = tridiagonal_eigenvalues(&diag, &off);
    levels.sort_by(f64::total_cmp);
    let (e0, e1) = (levels[0], levels[1]);
    let scale = diag.iter().chain(&off).fold(0.0_f64, |a, v| a.max(v.abs()));
    let gap = e1 - e0;
    if gap < DEGENERACY_TOL * scale {
        return Err(Error::DegenerateGround { gap });
    }

    let v = if field == 0.0 {
        // H is diagonal; for even N its minimum sits at J_z = 0 alone
        let mut v = vec![0.0; n + 1];
        v[n / 2] = 1.0;
        v
    } else {
        tridiagonal_inverse_iteration(&diag, &off, e0)
    };
    let j = n as f64 / 2.0;
    let mut jx = 0.0;
    let mut jz = 0.0;
    for a in 0..=n {
        let m = a as f64 - j;
        jz += m * v[a] * v[a];
        if a < n {
            jx += raising(j, m) * v[a] * v[a + 1];
        }
    }
    // the eigenvector is real, so ⟨Ĵy⟩ vanishes
    let magnetization = [2.0 * jx / n as f64, 0.0, 2.0 * jz / n as f64];
    let radius = magnetization.iter().map(|c| c * c).sum::<f64>().sqrt();
    Ok(GroundStateResult {
        energy: e0,
        magnetization,
        mutual_info_per_unit: binary_entropy(radius.min(1.0))?,
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    use crate::dicke::spin_operators;
    use crate::linalg::hermitian_eigen;
    use num_complex::Complex64;

    #[test]
    fn zero_field_gives_ln2() {
        for n in [2usize, 10, 40, 100, 400] {
            let g = ground_state_mutual_info(-1.0, 0.0, n).unwrap();
            assert!((g.mutual_info_per_unit - LN_2).abs() < 1e-10, "N = {n}");
            assert!(g.magnetization.iter().all(|m| m.abs() < 1e-10));
        }
    }

    #[test]
    fn strong_field_polarizes_against_the_field() {
        for h in [10.0, -10.0] {
            let g = ground_state_mutual_info(-1.0, h, 40).unwrap();
            assert!(g.mutual_info_per_unit < 1e-3);
            assert!((g.magnetization[0] + h.signum()).abs() < 1e-2, "{:?}", g.magnetization);
        }
        let g = ground_state_mutual_info(-1.0, 1e3, 40).unwrap();
        assert!(g.mutual_info_per_unit < 1e-6);
    }

    #[test]
    fn decay_is_faster_for_larger_systems() {
        let small = ground_state_mutual_info(-1.0, 0.2, 20).unwrap();
        let large = ground_state_mutual_info(-1.0, 0.2, 100).unwrap();
        assert!(large.mutual_info_per_unit < small.mutual_info_per_unit);
    }

    #[test]
    fn symmetric_in_the_field_sign() {
        for h in [0.05, 0.3, 1.7] {
            let a = ground_state_mutual_info(-2.0, h, 30).unwrap();
            let b = ground_state_mutual_info(-2.0, -h, 30).unwrap();
            assert!((a.mutual_info_per_unit - b.mutual_info_per_unit).abs() < 1e-10);
            assert!((a.magnetization[0] + b.magnetization[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn monotone_in_field_strength() {
        for n in [10usize, 50] {
            let mut last = f64::INFINITY;
            for k in 0..=60 {
                let g = ground_state_mutual_info(-1.0, 0.05 * k as f64, n).unwrap();
                assert!(g.mutual_info_per_unit <= last + 1e-12, "N = {n}, h = {}", 0.05 * k as f64);
                assert!((0.0..=LN_2 + 1e-12).contains(&g.mutual_info_per_unit));
                last = g.mutual_info_per_unit;
            }
        }
    }

    #[test]
    fn matches_dense_diagonalization() {
        let (n, coupling, field) = (8usize, -1.3, 0.4);
        let [jx, jy, _] = spin_operators(n);
        let h = jx
            .matmul(&jx)
            .add(&jy.matmul(&jy))
            .scaled(Complex64::new(coupling / n as f64, 0.0))
            .add(&jx.scaled(Complex64::new(field, 0.0)));
        let eig = hermitian_eigen(&h);
        let g = ground_state_mutual_info(coupling, field, n).unwrap();
        assert!((g.energy - eig.values[0]).abs() < 1e-12);
        let v: Vec<Complex64> = (0..=n).map(|a| eig.vectors[(a, 0)]).collect();
        let mx: f64 = (0..=n)
            .flat_map(|a| (0..=n).map(move |b| (a, b)))
            .map(|(a, b)| (v[a].conj() * jx[(a, b)] * v[b]).re)
            .sum::<f64>()
            * 2.0
            / n as f64;
        assert!((g.magnetization[0] - mx).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(ground_state_mutual_info(1.0, 0.1, 10), Err(Error::InvalidParams(_))));
        assert!(matches!(ground_state_mutual_info(-1.0, 0.1, 11), Err(Error::InvalidParams(_))));
        assert!(matches!(ground_state_mutual_info(-1.0, 0.1, 0), Err(Error::InvalidParams(_))));
        assert!(matches!(ground_state_mutual_info(-1.0, f64::NAN, 10), Err(Error::InvalidParams(_))));
    }
}
