//! Superoperator of the LMG master equation in the Dicke-sector layout.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{raising, DickeLayout};
use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::lmg::LmgParams;
use crate::sparse::Csr;

/// Above this dimension the operator is applied on the fly by default.
pub const MATRIX_FREE_THRESHOLD: usize = 1_000_000;

/// Upper bound on stored entries per row (3 + 3 Hamiltonian, 1 decay gain,
/// 3 pumping gains, 1 diagonal).
const MAX_ROW_ENTRIES: usize = 11;

/// Estimated megabytes for the stored operator and its adjoint.
pub fn estimate_memory_mb(n: usize) -> usize {
    let dim = match DickeLayout::new(n) {
        Ok(l) => l.dim(),
        Err(_) => return 0,
    };
    let per_entry = std::mem::size_of::<Complex64>() + std::mem::size_of::<usize>();
    (2 * dim * MAX_ROW_ENTRIES * per_entry).div_ceil(1 << 20)
}

/// Coefficient formulas of the generator; the source of every row.
#[derive(Clone, Debug)]
struct Generator {
    layout: DickeLayout,
    params: LmgParams,
}

impl Generator {
    /// Calls `push(column, value)` for every entry of row `(k, a, b)`.
    fn row(&self, k: usize, a: usize, b: usize, push: &mut dyn FnMut(usize, Complex64)) {
        let s = self.layout.sectors()[k];
        let n = self.layout.n() as f64;
        let size = s.size();
        let j = s.j();
        let (ma, mb) = (s.m(a), s.m(b));
        let LmgParams {
            coupling,
            field,
            collective_rate: gamma_c,
            local_rate: gamma_l,
        } = self.params;
        let at = |r: usize, c: usize| s.offset + r * size + c;
        let i = Complex64::new(0.0, 1.0);

        // -i[H, ρ] with H = 𝒥(J² - Jz²)/N + h Jx
        let h_diag = |m: f64| coupling * (j * (j + 1.0) - m * m) / n;
        let h_off = |lo: f64| 0.5 * field * raising(j, lo);
        let mut diag = -i * (h_diag(ma) - h_diag(mb));
        if field != 0.0 {
            if a > 0 {
                push(at(a - 1, b), -i * h_off(ma - 1.0));
            }
            if a + 1 < size {
                push(at(a + 1, b), -i * h_off(ma));
            }
            if b > 0 {
                push(at(a, b - 1), i * h_off(mb - 1.0));
            }
            if b + 1 < size {
                push(at(a, b + 1), i * h_off(mb));
            }
        }

        // (Γ/N)(J₋ρJ₊ - {J₊J₋, ρ}/2)
        if gamma_c != 0.0 {
            let rate = gamma_c / n;
            if a + 1 < size && b + 1 < size {
                push(at(a + 1, b + 1), (rate * raising(j, ma) * raising(j, mb)).into());
            }
            let lowered = |m: f64| (j + m) * (j - m + 1.0);
            diag -= 0.5 * rate * (lowered(ma) + lowered(mb));
        }

        // local pumping: depletion and gains from J' = J - 1, J, J + 1
        diag -= 0.5 * gamma_l * (n - ma - mb);
        let (sa, sb) = (ma - 1.0, mb - 1.0);
        for delta in [-2i64, 0, 2] {
            let two_jp = s.two_j as i64 + delta;
            if two_jp < 0 {
                continue;
            }
            let two_jp = two_jp as usize;
            let Some(kp) = self.layout.sector_position(two_jp) else {
                continue;
            };
            let jp = two_jp as f64 / 2.0;
            if sa.abs() > jp || sb.abs() > jp {
                continue;
            }
            let rate = match delta {
                2 => {
                    let bp = |m: f64| ((jp - m) * (jp - m - 1.0)).max(0.0).sqrt();
                    0.5 * gamma_l * bp(sa) * bp(sb) * (0.5 * n + jp + 1.0) / (jp * (2.0 * jp + 1.0))
                }
                0 => {
                    if two_jp == 0 {
                        continue;
                    }
                    let ap = |m: f64| ((jp - m) * (jp + m + 1.0)).max(0.0).sqrt();
                    0.5 * gamma_l * ap(sa) * ap(sb) * (0.5 * n + 1.0) / (jp * (jp + 1.0))
                }
                _ => {
                    // D₊ carries a minus sign on both factors
                    let dp = |m: f64| ((jp + m + 1.0) * (jp + m + 2.0)).max(0.0).sqrt();
                    0.5 * gamma_l * dp(sa) * dp(sb) * (0.5 * n - jp) / ((jp + 1.0) * (2.0 * jp + 1.0))
                }
            };
            if rate != 0.0 {
                let sp = self.layout.sectors()[kp];
                let row = (sa + jp).round() as usize;
                let col = (sb + jp).round() as usize;
                push(sp.offset + row * sp.size() + col, rate.into());
            }
        }
        push(at(a, b), diag);
    }

    /// Applies the generator sector by sector, gathering into `y`.
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let mut parts: Vec<(usize, &mut [Complex64])> = Vec::with_capacity(self.layout.sectors().len());
        let mut rest = y;
        for (k, s) in self.layout.sectors().iter().enumerate() {
            let (head, tail) = rest.split_at_mut(s.size() * s.size());
            parts.push((k, head));
            rest = tail;
        }
        parts.into_par_iter().for_each(|(k, out)| {
            let size = self.layout.sectors()[k].size();
            for (local, yi) in out.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                self.row(k, local / size, local % size, &mut |c, v| acc += v * x[c]);
                *yi = acc;
            }
        });
    }

    /// `x = ℒ† y` by scattering every row.
    fn apply_adjoint(&self, y: &[Complex64], x: &mut [Complex64]) {
        x.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (k, s) in self.layout.sectors().iter().enumerate() {
            for a in 0..s.size() {
                for b in 0..s.size() {
                    let yi = y[s.offset + a * s.size() + b];
                    if yi == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    self.row(k, a, b, &mut |c, v| x[c] += v.conj() * yi);
                }
            }
        }
    }
}

impl Generator {
    fn column_norms_sq(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.layout.dim()];
        for (k, s) in self.layout.sectors().iter().enumerate() {
            for a in 0..s.size() {
                for b in 0..s.size() {
                    self.row(k, a, b, &mut |c, v| out[c] += v.norm_sqr());
                }
            }
        }
        out
    }
}

fn validated(params: &LmgParams, n: usize) -> Result<Generator> {
    params.validate()?;
    Ok(Generator {
        layout: DickeLayout::new(n)?,
        params: *params,
    })
}

/// Stored operator with its adjoint.
#[derive(Clone, Debug)]
pub struct SparseSuperoperator {
    layout: DickeLayout,
    params: LmgParams,
    matrix: Csr<Complex64>,
    adjoint: Csr<Complex64>,
}

impl SparseSuperoperator {
    pub fn layout(&self) -> &DickeLayout {
        &self.layout
    }

    pub fn params(&self) -> &LmgParams {
        &self.params
    }

    pub fn dimension(&self) -> usize {
        self.layout.dim()
    }

    pub fn matrix(&self) -> &Csr<Complex64> {
        &self.matrix
    }

    pub fn memory_bytes(&self) -> usize {
        self.matrix.memory_bytes() + self.adjoint.memory_bytes()
    }
}

/// Assembles the stored operator without a memory cap.
pub fn assemble_liouvillian(params: &LmgParams, n: usize) -> Result<SparseSuperoperator> {
    assemble_liouvillian_with_cap(params, n, None)
}

/// Assembles the stored operator; fails with [`Error::OutOfMemory`] when the
/// estimate exceeds `cap_mb`.
pub fn assemble_liouvillian_with_cap(
    params: &LmgParams,
    n: usize,
    cap_mb: Option<usize>,
) -> Result<SparseSuperoperator> {
    let generator = validated(params, n)?;
    let dim = generator.layout.dim();
    if let Some(cap) = cap_mb {
        let need = estimate_memory_mb(n);
        if need > cap {
            return Err(Error::OutOfMemory {
                dimension: dim,
                required_mb: need,
                cap_mb: cap,
            });
        }
    }
    let locations: Vec<(usize, usize, usize)> = (0..dim).map(|i| generator.layout.locate(i)).collect();
    let matrix = Csr::from_rows(dim, dim, |i, push| {
        let (k, a, b) = locations[i];
        generator.row(k, a, b, push);
    });
    let adjoint = matrix.adjoint();
    Ok(SparseSuperoperator {
        layout: generator.layout,
        params: *params,
        matrix,
        adjoint,
    })
}

/// Operator evaluated from the coefficient formulas on every product.
#[derive(Clone, Debug)]
pub struct MatrixFreeLiouvillian {
    generator: Generator,
}

impl MatrixFreeLiouvillian {
    pub fn new(params: &LmgParams, n: usize) -> Result<Self> {
        Ok(Self {
            generator: validated(params, n)?,
        })
    }

    pub fn layout(&self) -> &DickeLayout {
        &self.generator.layout
    }
}

/// Either representation of `ℒ`.
#[derive(Clone, Debug)]
pub enum Superoperator {
    Sparse(SparseSuperoperator),
    MatrixFree(MatrixFreeLiouvillian),
}

impl Superoperator {
    /// Stored when the dimension is at most [`MATRIX_FREE_THRESHOLD`] and
    /// the estimate fits `cap_mb`, matrix-free otherwise. `force_matrix_free`
    /// skips assembly altogether.
    pub fn build(params: &LmgParams, n: usize, cap_mb: Option<usize>, force_matrix_free: bool) -> Result<Self> {
        let layout = DickeLayout::new(n)?;
        let too_big = cap_mb.is_some_and(|cap| estimate_memory_mb(n) > cap);
        if force_matrix_free || too_big || layout.dim() > MATRIX_FREE_THRESHOLD {
            Ok(Self::MatrixFree(MatrixFreeLiouvillian::new(params, n)?))
        } else {
            Ok(Self::Sparse(assemble_liouvillian(params, n)?))
        }
    }

    pub fn layout(&self) -> &DickeLayout {
        match self {
            Self::Sparse(s) => &s.layout,
            Self::MatrixFree(m) => &m.generator.layout,
        }
    }

    /// `Σ_i |ℒ_ij|²` per column.
    pub fn column_norms_sq(&self) -> Vec<f64> {
        match self {
            Self::Sparse(s) => s.matrix.column_norms_sq(),
            Self::MatrixFree(m) => m.generator.column_norms_sq(),
        }
    }

    pub fn is_matrix_free(&self) -> bool {
        matches!(self, Self::MatrixFree(_))
    }
}

impl LinearOperator<Complex64> for SparseSuperoperator {
    fn nrows(&self) -> usize {
        self.dimension()
    }
    fn ncols(&self) -> usize {
        self.dimension()
    }
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.matrix.matvec(x, y);
    }
    fn apply_adjoint(&self, y: &[Complex64], x: &mut [Complex64]) {
        self.adjoint.matvec(y, x);
    }
}

impl LinearOperator<Complex64> for MatrixFreeLiouvillian {
    fn nrows(&self) -> usize {
        self.generator.layout.dim()
    }
    fn ncols(&self) -> usize {
        self.generator.layout.dim()
    }
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.generator.apply(x, y);
    }
    fn apply_adjoint(&self, y: &[Complex64], x: &mut [Complex64]) {
        self.generator.apply_adjoint(y, x);
    }
}

impl LinearOperator<Complex64> for Superoperator {
    fn nrows(&self) -> usize {
        self.layout().dim()
    }
    fn ncols(&self) -> usize {
        self.layout().dim()
    }
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        match self {
            Self::Sparse(s) => s.apply(x, y),
            Self::MatrixFree(m) => m.apply(x, y),
        }
    }
    fn apply_adjoint(&self, y: &[Complex64], x: &mut [Complex64]) {
        match self {
            Self::Sparse(s) => s.apply_adjoint(y, x),
            Self::MatrixFree(m) => m.apply_adjoint(y, x),
        }
    }
}
