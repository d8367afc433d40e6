//! Driven-dissipative LMG model: XY exchange `𝒥`, transverse field `h`,
//! collective decay at rate `Γ/N` and local pumping at rate `γ`.

use crate::error::{Error, Result};
use crate::linalg::RMatrix;
use crate::meanfield::DriftSystem;
use crate::state_space::binary_entropy;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LmgParams {
    /// Exchange coupling `𝒥`.
    pub coupling: f64,
    /// Transverse field `h` along x.
    pub field: f64,
    /// Collective decay rate `Γ`.
    pub collective_rate: f64,
    /// Local pumping rate `γ`.
    pub local_rate: f64,
}

impl LmgParams {
    pub fn new(coupling: f64, field: f64, collective_rate: f64, local_rate: f64) -> Result<Self> {
        let p = Self {
            coupling,
            field,
            collective_rate,
            local_rate,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.coupling, self.field, self.collective_rate, self.local_rate];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("parameters must be finite".into()));
        }
        if self.local_rate <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "local rate must be positive, got {}",
                self.local_rate
            )));
        }
        if self.collective_rate < 0.0 {
            return Err(Error::InvalidParams(format!(
                "collective rate must be non-negative, got {}",
                self.collective_rate
            )));
        }
        Ok(())
    }
}

/// Mean-field velocity `dm/dt` at Bloch vector `m = (m_x, m_y, m_z)`.
pub fn lmg_drift(m: &[f64], p: &LmgParams) -> [f64; 3] {
    let (x, y, z) = (m[0], m[1], m[2]);
    let LmgParams {
        coupling: j,
        field: h,
        collective_rate: g,
        local_rate: l,
    } = *p;
    [
        j * y * z + 0.5 * g * x * z - 0.5 * l * x,
        -j * x * z - h * z + 0.5 * g * y * z - 0.5 * l * y,
        h * y - 0.5 * g * (x * x + y * y) + l * (1.0 - z),
    ]
}

/// Exact Jacobian of [`lmg_drift`], rows indexed by the velocity component.
pub fn lmg_jacobian(m: &[f64], p: &LmgParams) -> RMatrix {
    let (x, y, z) = (m[0], m[1], m[2]);
    let LmgParams {
        coupling: j,
        field: h,
        collective_rate: g,
        local_rate: l,
    } = *p;
    let diag = 0.5 * (g * z - l);
    RMatrix::from_row_major(
        3,
        3,
        vec![
            diag,
            j * z,
            j * y + 0.5 * g * x,
            -j * z,
            diag,
            -j * x - h + 0.5 * g * y,
            -g * x,
            h - g * y,
            -l,
        ],
    )
}

impl DriftSystem for LmgParams {
    fn levels(&self) -> usize {
        2
    }

    fn field(&self, xi: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&lmg_drift(xi, self));
    }

    fn jacobian(&self, xi: &[f64]) -> RMatrix {
        lmg_jacobian(xi, self)
    }
}

/// Radius, height and angular frequency of the `h = 0` limit cycle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitCycleParams {
    pub m_xy: f64,
    pub m_z: f64,
    pub omega: f64,
}

impl LimitCycleParams {
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega.abs()
    }

    /// Point on the cycle at phase `phi`: `(m_xy sin φ, m_xy cos φ, m_z)`.
    pub fn point(&self, phi: f64) -> [f64; 3] {
        [self.m_xy * phi.sin(), self.m_xy * phi.cos(), self.m_z]
    }
}

fn require_zero_field(p: &LmgParams) -> Result<()> {
    p.validate()?;
    if p.field != 0.0 {
        return Err(Error::InvalidParams(format!(
            "closed form needs zero field, got h = {}",
            p.field
        )));
    }
    Ok(())
}

pub fn analytic_limit_cycle(p: &LmgParams) -> Result<LimitCycleParams> {
    require_zero_field(p)?;
    let (g, l) = (p.collective_rate, p.local_rate);
    if g <= l {
        return Err(Error::NoCycle(format!(
            "stable fixed point at m_z = 1 for collective rate {g} <= local rate {l}"
        )));
    }
    Ok(LimitCycleParams {
        m_xy: (2.0 * l * (g - l)).sqrt() / g,
        m_z: l / g,
        omega: p.coupling * l / g,
    })
}

/// Large-N intensive mutual information at `h = 0`: zero in the fixed-point
/// phase, `b(m_z) - b(|m|)` on the cycle.
pub fn analytic_mutual_info(p: &LmgParams) -> Result<f64> {
    require_zero_field(p)?;
    if p.collective_rate <= p.local_rate {
        return Ok(0.0);
    }
    let c = analytic_limit_cycle(p)?;
    let radius = (c.m_z * c.m_z + c.m_xy * c.m_xy).sqrt().min(1.0);
    Ok((binary_entropy(c.m_z)? - binary_entropy(radius)?).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params(h: f64, g: f64) -> LmgParams {
        LmgParams::new(3.0, h, g, 1.0).unwrap()
    }

    #[test]
    fn north_pole_is_stationary() {
        for (j, g, l) in [(3.0, 2.0, 1.0), (-1.0, 0.3, 2.0)] {
            let p = LmgParams::new(j, 0.0, g, l).unwrap();
            assert_eq!(lmg_drift(&[0.0, 0.0, 1.0], &p), [0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn hand_evaluated_drift() {
        let v = lmg_drift(&[0.2, 0.1, 0.3], &params(0.5, 2.0));
        assert_abs_diff_eq!(v[0], 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], -0.35, epsilon = 1e-15);
        assert_abs_diff_eq!(v[2], 0.70, epsilon = 1e-15);
    }

    #[test]
    fn jacobian_at_origin() {
        let jac = lmg_jacobian(&[0.0, 0.0, 0.0], &params(0.0, 2.0));
        assert_eq!(jac[(0, 0)], -0.5);
        assert_eq!(jac[(1, 1)], -0.5);
        assert_eq!(jac[(2, 2)], -1.0);
        assert_eq!(jac[(0, 1)], 0.0);
        assert_eq!(jac[(1, 0)], 0.0);
        assert_eq!(jac[(1, 2)], 0.0);
        let m = [0.1, -0.4, 0.6];
        assert_eq!(lmg_jacobian(&m, &params(0.5, 2.0))[(0, 1)], 3.0 * 0.6);
    }

    #[test]
    fn analytic_cycle_values() {
        let c = analytic_limit_cycle(&params(0.0, 2.0)).unwrap();
        assert_abs_diff_eq!(c.m_xy, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_eq!(c.m_z, 0.5);
        assert_eq!(c.omega, 1.5);
        let v = lmg_drift(&[0.0, c.m_xy, c.m_z], &params(0.0, 2.0));
        assert_abs_diff_eq!(v[0], c.omega * c.m_xy, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[2], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn cycle_collapses_at_bifurcation() {
        let c = analytic_limit_cycle(&params(0.0, 1.0 + 1e-9)).unwrap();
        assert!(c.m_xy < 1e-4);
        assert!((c.m_z - 1.0).abs() < 1e-8);
        assert!(matches!(analytic_limit_cycle(&params(0.0, 0.5)), Err(Error::NoCycle(_))));
        assert!(matches!(analytic_limit_cycle(&params(0.0, 1.0)), Err(Error::NoCycle(_))));
        assert!(analytic_limit_cycle(&params(0.5, 2.0)).is_err());
    }

    #[test]
    fn analytic_mutual_info_values() {
        assert_eq!(analytic_mutual_info(&params(0.0, 0.5)).unwrap(), 0.0);
        assert_eq!(analytic_mutual_info(&params(0.0, 1.0)).unwrap(), 0.0);
        let oracle = {
            let b = |x: f64| -(0.5 * (1.0 + x) * (0.5 * (1.0 + x)).ln() + 0.5 * (1.0 - x) * (0.5 * (1.0 - x)).ln());
            b(0.5) - b(0.75f64.sqrt())
        };
        assert_abs_diff_eq!(oracle, 0.316559, epsilon = 1e-6);
        assert_abs_diff_eq!(analytic_mutual_info(&params(0.0, 2.0)).unwrap(), oracle, epsilon = 1e-14);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(LmgParams::new(3.0, 0.0, 1.0, 0.0).is_err());
        assert!(LmgParams::new(3.0, 0.0, -1.0, 1.0).is_err());
        assert!(LmgParams::new(f64::NAN, 0.0, 1.0, 1.0).is_err());
    }

    fn ball_point() -> impl Strategy<Value = [f64; 3]> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y, z, r)| {
            let n = (x * x + y * y + z * z).sqrt().max(1e-9);
            [r * x / n, r * y / n, r * z / n]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn jacobian_matches_finite_differences(
            m in ball_point(),
            j in -4.0..4.0f64, h in -1.0..1.0f64, g in 0.0..4.0f64, l in 0.1..2.0f64,
        ) {
            let p = LmgParams::new(j, h, g, l).unwrap();
            let jac = lmg_jacobian(&m, &p);
            let step = 1e-6;
            for c in 0..3 {
                let mut plus = m;
                let mut minus = m;
                plus[c] += step;
                minus[c] -= step;
                let (gp, gm) = (lmg_drift(&plus, &p), lmg_drift(&minus, &p));
                for r in 0..3 {
                    let fd = (gp[r] - gm[r]) / (2.0 * step);
                    prop_assert!((fd - jac[(r, c)]).abs() < 1e-6);
                }
            }
        }

        #[test]
        fn cycle_is_an_exact_orbit(g in 1.0001..6.0f64, j in -4.0..4.0f64, phi in 0.0..std::f64::consts::TAU) {
            let p = LmgParams::new(j, 0.0, g, 1.0).unwrap();
            let c = analytic_limit_cycle(&p).unwrap();
            let v = lmg_drift(&c.point(phi), &p);
            let want = [c.omega * c.m_xy * phi.cos(), -c.omega * c.m_xy * phi.sin(), 0.0];
            for k in 0..3 {
                prop_assert!((v[k] - want[k]).abs() < 1e-12);
            }
        }

        #[test]
        fn analytic_mutual_info_is_nonnegative(g in 0.0..10.0f64) {
            prop_assert!(analytic_mutual_info(&params(0.0, g)).unwrap() >= 0.0);
        }
    }
}
