//! Monodromy matrices and Floquet multipliers of limit cycles.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{nonsymmetric_eigenvalues, Lu, RMatrix};
use crate::meanfield::{flow_with_variational, AttractorKind, AttractorReport, DriftSystem, Trajectory};
use crate::ode::Tolerances;
use crate::quadrature::gauss_legendre_on;

pub const DEFAULT_TOL_UNIT: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct FloquetReport {
    pub period: f64,
    /// Eigenvalues of `𝕄(T)`, by decreasing modulus.
    pub multipliers: Vec<Complex64>,
    /// `min |μ - 1|` over the multipliers.
    pub unit_multiplier_error: f64,
    pub is_hyperbolic: bool,
    pub is_attractive: bool,
    pub monodromy: RMatrix,
    /// `det 𝕄(T)`.
    pub determinant: f64,
    /// `∫₀ᵀ tr 𝕁(ξ_t) dt` by quadrature on the cycle.
    pub trace_integral: f64,
}

impl FloquetReport {
    /// `|det 𝕄(T) / exp(∫ tr 𝕁) - 1|`.
    pub fn determinant_mismatch(&self) -> f64 {
        (self.determinant / self.trace_integral.exp() - 1.0).abs()
    }
}

fn cycle_of(report: &AttractorReport) -> Result<(f64, &Trajectory)> {
    match &report.kind {
        AttractorKind::LimitCycle { period, cycle, .. } => Ok((*period, cycle)),
        _ => Err(Error::NoCycle(format!(
            "Floquet analysis needs a limit cycle, got {}",
            report.label()
        ))),
    }
}

/// `𝕄(T)` for the cycle in `report`, started at its section point.
pub fn monodromy<S: DriftSystem + ?Sized>(sys: &S, report: &AttractorReport) -> Result<RMatrix> {
    let (period, cycle) = cycle_of(report)?;
    monodromy_from(sys, &cycle.initial_state(), period, &Tolerances::new(1e-10, 1e-12))
}

/// `𝕄(T)` solving `d𝕄/dt = 𝕁(ξ_t) 𝕄`, `𝕄(0) = 𝟙`, alongside `ξ_t` from `x0`.
pub fn monodromy_from<S: DriftSystem + ?Sized>(
    sys: &S,
    x0: &[f64],
    period: f64,
    tol: &Tolerances,
) -> Result<RMatrix> {
    Ok(flow_with_variational(sys, x0, period, tol)?.1)
}

/// `∫₀ᵀ tr 𝕁` by Gauss–Legendre on the dense cycle, nodes doubled to 1e-13.
pub fn trace_integral<S: DriftSystem + ?Sized>(sys: &S, report: &AttractorReport) -> Result<f64> {
    let (period, cycle) = cycle_of(report)?;
    let t0 = cycle.t_start();
    let quad = |n: usize| {
        let (ts, ws) = gauss_legendre_on(n, t0, t0 + period);
        ts.iter()
            .zip(&ws)
            .map(|(t, w)| w * sys.jacobian(&cycle.eval(*t)).trace())
            .sum::<f64>()
    };
    let mut n = 64;
    let mut value = quad(n);
    while n < 1 << 14 {
        n *= 2;
        let next = quad(n);
        let done = (next - value).abs() < 1e-13 * (1.0 + next.abs());
        value = next;
        if done {
            break;
        }
    }
    Ok(value)
}

pub fn floquet_analysis<S: DriftSystem + ?Sized>(
    sys: &S,
    report: &AttractorReport,
) -> Result<FloquetReport> {
    floquet_analysis_with(sys, report, DEFAULT_TOL_UNIT)
}

pub fn floquet_analysis_with<S: DriftSystem + ?Sized>(
    sys: &S,
    report: &AttractorReport,
    tol_unit: f64,
) -> Result<FloquetReport> {
    let (period, _) = cycle_of(report)?;
    let m = monodromy(sys, report)?;
    let mut multipliers = nonsymmetric_eigenvalues(&m);
    multipliers.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    let near_one = multipliers
        .iter()
        .filter(|mu| (*mu - 1.0).norm() < tol_unit)
        .count();
    if near_one > 1 {
        return Err(Error::Degenerate {
            count: near_one,
            tol: tol_unit,
        });
    }
    let unit_multiplier_error = multipliers
        .iter()
        .map(|mu| (mu - 1.0).norm())
        .fold(f64::INFINITY, f64::min);
    let others = || multipliers.iter().filter(|mu| (*mu - 1.0).norm() >= tol_unit);
    let is_hyperbolic = near_one == 1 && others().all(|mu| (mu.norm() - 1.0).abs() > tol_unit);
    let is_attractive = is_hyperbolic && others().all(|mu| mu.norm() < 1.0);
    let determinant = Lu::factor(&m).determinant();
    Ok(FloquetReport {
        period,
        multipliers,
        unit_multiplier_error,
        is_hyperbolic,
        is_attractive,
        monodromy: m,
        determinant,
        trace_integral: trace_integral(sys, report)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmg::{analytic_limit_cycle, LmgParams};
    use crate::meanfield::{find_attractor, LinearDrift, MeanFieldSettings};
    use crate::state_space::BlochVector;

    fn expm(a: &RMatrix) -> RMatrix {
        // scaling and squaring with a 20-term Taylor series
        let norm = a.max_abs() * a.rows() as f64;
        let squarings = norm.log2().ceil().max(0.0) as i32 + 1;
        let scaled = a.scaled(0.5f64.powi(squarings));
        let mut term = RMatrix::identity(a.rows());
        let mut sum = term.clone();
        for k in 1..=20 {
            term = term.matmul(&scaled).scaled(1.0 / k as f64);
            sum = sum.add(&term);
        }
        for _ in 0..squarings {
            sum = sum.matmul(&sum);
        }
        sum
    }

    fn cycle(h: f64) -> (LmgParams, AttractorReport) {
        let p = LmgParams::new(3.0, h, 2.0, 1.0).unwrap();
        let r = find_attractor(&p, &BlochVector::qubit(0.3, 0.0, 0.8), &MeanFieldSettings::default()).unwrap();
        (p, r)
    }

    #[test]
    fn zero_jacobian_gives_identity() {
        let sys = LinearDrift::zero(2);
        let m = monodromy_from(&sys, &[0.1, 0.2, 0.3], 5.0, &Tolerances::new(1e-10, 1e-12)).unwrap();
        assert_eq!(m, RMatrix::identity(3));
    }

    #[test]
    fn linear_drift_matches_matrix_exponential() {
        let a = RMatrix::from_row_major(3, 3, vec![-0.3, 1.2, 0.0, -1.1, -0.2, 0.4, 0.1, 0.0, -0.5]);
        let sys = LinearDrift::new(2, a.clone()).unwrap();
        let t = 2.7;
        let m = monodromy_from(&sys, &[0.1, 0.0, 0.2], t, &Tolerances::new(1e-10, 1e-12)).unwrap();
        let want = expm(&a.scaled(t));
        assert!(m.sub(&want).max_abs() < 1e-8, "{:e}", m.sub(&want).max_abs());
    }

    #[test]
    fn analytic_cycle_is_hyperbolic_and_attractive() {
        let (p, r) = cycle(0.0);
        let f = floquet_analysis(&p, &r).unwrap();
        assert_eq!(f.multipliers.len(), 3);
        assert!(f.unit_multiplier_error < 1e-6);
        assert!(f.is_hyperbolic && f.is_attractive);
        assert!(f.determinant_mismatch() < 1e-8, "{:e}", f.determinant_mismatch());
        // tr 𝕁 = -γ on the cycle
        let exact = -analytic_limit_cycle(&p).unwrap().period();
        assert!((f.trace_integral - exact).abs() < 1e-7);
    }

    #[test]
    fn velocity_is_the_unit_eigenvector() {
        let (p, r) = cycle(0.0);
        let m = monodromy(&p, &r).unwrap();
        let AttractorKind::LimitCycle { cycle, .. } = &r.kind else { panic!() };
        let mut g = vec![0.0; 3];
        p.field(&cycle.initial_state(), &mut g);
        let mg = m.matvec(&g);
        let err = mg.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-7, "{err:e}");
    }

    #[test]
    fn multipliers_do_not_depend_on_phase() {
        let (p, r) = cycle(0.0);
        let AttractorKind::LimitCycle { period, cycle, .. } = &r.kind else { panic!() };
        let tol = Tolerances::new(1e-11, 1e-13);
        let sorted = |x0: &[f64]| {
            let mut mu = nonsymmetric_eigenvalues(&monodromy_from(&p, x0, *period, &tol).unwrap());
            mu.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
            mu
        };
        let a = sorted(&cycle.initial_state());
        let b = sorted(&cycle.eval(cycle.t_start() + period / 3.0));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn field_cycle_is_hyperbolic_and_attractive() {
        let (p, r) = cycle(0.5);
        let f = floquet_analysis(&p, &r).unwrap();
        assert!(f.unit_multiplier_error < 1e-6);
        assert!(f.is_hyperbolic && f.is_attractive, "{:?}", f.multipliers);
        assert!(f.determinant_mismatch() < 1e-8, "{:e}", f.determinant_mismatch());
    }

    #[test]
    fn fixed_point_is_rejected() {
        let p = LmgParams::new(3.0, 0.0, 0.5, 1.0).unwrap();
        let r = find_attractor(&p, &BlochVector::qubit(0.3, 0.0, 0.8), &MeanFieldSettings::default()).unwrap();
        assert!(matches!(floquet_analysis(&p, &r), Err(Error::NoCycle(_))));
    }
}
