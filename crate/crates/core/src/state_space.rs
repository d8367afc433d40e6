//! Single-unit states: generalized Bloch vectors, density matrices, spectra
//! and von Neumann entropies. Entropies are in nats.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, CMatrix};

/// Eigenvalues below this are rounding noise and get clamped to zero.
pub const CLAMP_THRESHOLD: f64 = 1e-12;
/// Eigenvalues below this make the input invalid.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-10;

/// Coordinates `ξ` of a `d`-level unit in the traceless SU(d) basis.
#[derive(Clone, Debug, PartialEq)]
pub struct BlochVector {
    d: usize,
    coords: Vec<f64>,
}

impl BlochVector {
    pub fn new(d: usize, coords: Vec<f64>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParams(format!("level count {d} < 2")));
        }
        if coords.len() != d * d - 1 {
            return Err(Error::DimensionMismatch {
                expected: d * d - 1,
                got: coords.len(),
            });
        }
        Ok(Self { d, coords })
    }

    /// Qubit Bloch vector `(m_x, m_y, m_z)`.
    pub fn qubit(x: f64, y: f64, z: f64) -> Self {
        Self {
            d: 2,
            coords: vec![x, y, z],
        }
    }

    pub fn levels(&self) -> usize {
        self.d
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Hermitian, unit-trace, positive semidefinite `d × d` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitDensity {
    matrix: CMatrix,
}

impl UnitDensity {
    /// Validates Hermiticity and trace to 1e-12 and positivity to
    /// [`NEGATIVITY_TOLERANCE`].
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() < 1 {
            return Err(Error::InvalidParams("density matrix must be square".into()));
        }
        let herm = matrix.hermiticity_residual();
        if herm > 1e-12 {
            return Err(Error::InvalidParams(format!(
                "density matrix not Hermitian (residual {herm:e})"
            )));
        }
        let tr = matrix.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
            return Err(Error::InvalidParams(format!("density matrix trace {tr} != 1")));
        }
        let min = hermitian_eigenvalues(&matrix)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min < -NEGATIVITY_TOLERANCE {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        Ok(Self { matrix })
    }

    pub fn levels(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Maximally mixed state `𝟙/d`.
    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            matrix: CMatrix::identity(d).scaled(Complex64::new(1.0 / d as f64, 0.0)),
        }
    }

    /// Coordinates in the SU(d) basis, `ξ_α = (d/2) Tr(ρ v_α)`.
    pub fn bloch_vector(&self) -> BlochVector {
        let d = self.levels();
        let coords = su_basis(d)
            .iter()
            .map(|v| 0.5 * d as f64 * self.matrix.matmul(v).trace().re)
            .collect();
        BlochVector { d, coords }
    }
}

/// Eigenvalues of a density matrix, descending, clamped and renormalized.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
}

impl Spectrum {
    /// Builds a spectrum from raw eigenvalues: hard error below
    /// `-NEGATIVITY_TOLERANCE`, clamped, sorted descending, renormalized.
    pub fn from_eigenvalues(mut values: Vec<f64>) -> Result<Self> {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -NEGATIVITY_TOLERANCE {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        for v in &mut values {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        values.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = values.iter().sum();
        if total > 0.0 {
            for v in &mut values {
                *v /= total;
            }
        }
        Ok(Self { eigenvalues: values })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Shannon entropy of the eigenvalues, `0 ln 0 = 0`.
    pub fn entropy(&self) -> f64 {
        shannon_entropy(&self.eigenvalues)
    }
}

/// `-Σ p ln p` with `0 ln 0 = 0`. Entries need not sum to one.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// Traceless Hermitian basis of SU(d) with `Tr(v_α v_β) = 2 δ_αβ`.
///
/// Ordering: symmetric off-diagonal generators for `j < k`, then the
/// antisymmetric ones, then the diagonal ones. For `d = 2` this is
/// `(σ_x, σ_y, σ_z)`.
pub fn su_basis(d: usize) -> Vec<CMatrix> {
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let mut basis = Vec::with_capacity(d * d - 1);
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|j| ((j + 1)..d).map(move |k| (j, k)))
        .collect();
    for &(j, k) in &pairs {
        let mut m = CMatrix::zeros(d, d);
        m[(j, k)] = one;
        m[(k, j)] = one;
        basis.push(m);
    }
    for &(j, k) in &pairs {
        let mut m = CMatrix::zeros(d, d);
        m[(j, k)] = -i;
        m[(k, j)] = i;
        basis.push(m);
    }
    // diagonal generators ordered so that d = 2 yields σ_z = diag(1, -1)
    for l in 1..d {
        let norm = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut m = CMatrix::zeros(d, d);
        for a in 0..l {
            m[(a, a)] = one * norm;
        }
        m[(l, l)] = one * (-(l as f64) * norm);
        basis.push(m);
    }
    basis
}

/// `ρ = (𝟙 + ξ·v)/d`.
pub fn density_from_bloch(xi: &BlochVector) -> Result<UnitDensity> {
    let d = xi.levels();
    let matrix = if d == 2 {
        let [x, y, z] = [xi.coords[0], xi.coords[1], xi.coords[2]];
        CMatrix::from_row_major(
            2,
            2,
            vec![
                Complex64::new(0.5 * (1.0 + z), 0.0),
                Complex64::new(0.5 * x, -0.5 * y),
                Complex64::new(0.5 * x, 0.5 * y),
                Complex64::new(0.5 * (1.0 - z), 0.0),
            ],
        )
    } else {
        let mut m = CMatrix::identity(d);
        for (c, v) in xi.coords.iter().zip(su_basis(d)) {
            m = m.add(&v.scaled(Complex64::new(*c, 0.0)));
        }
        m.scaled(Complex64::new(1.0 / d as f64, 0.0))
    };
    let min = if d == 2 {
        0.5 * (1.0 - xi.norm())
    } else {
        hermitian_eigenvalues(&matrix)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    };
    if min < -NEGATIVITY_TOLERANCE {
        return Err(Error::BlochOutOfBody { min_eigenvalue: min });
    }
    Ok(UnitDensity { matrix })
}

pub fn spectrum(rho: &UnitDensity) -> Result<Spectrum> {
    let values = if rho.levels() == 2 {
        qubit_eigenvalues(&rho.matrix)
    } else {
        hermitian_eigenvalues(&rho.matrix)
    };
    Spectrum::from_eigenvalues(values)
}

/// Closed form for 2×2 Hermitian matrices.
fn qubit_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(0, 1)];
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    vec![mean + radius, mean - radius]
}

/// `S(ρ) = -Tr ρ ln ρ` in nats.
pub fn von_neumann_entropy(rho: &UnitDensity) -> Result<f64> {
    Ok(spectrum(rho)?.entropy())
}

/// `b(x) = -Σ_± (1±x)/2 ln((1±x)/2)`: entropy of a qubit with Bloch radius `x`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    const TOL: f64 = 1e-12;
    if !(-TOL..=1.0 + TOL).contains(&x) || x.is_nan() {
        return Err(Error::DomainError {
            value: x,
            domain: "[0, 1]",
        });
    }
    let x = x.clamp(0.0, 1.0);
    Ok(shannon_entropy(&[0.5 * (1.0 + x), 0.5 * (1.0 - x)]))
}
