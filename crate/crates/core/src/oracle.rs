//! Brute-force reference for `N ≤ 4`: the full `4^N`-dimensional Lindblad
//! generator, its null vector, partial traces and entropies. Used only to
//! validate the sector solver.
//!
//! Single-unit basis `(↑, ↓)`; unit `i` is tensor factor `i` (unit 0 most
//! significant). Operators are vectorized by stacking columns, so
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use num_complex::Complex64;

use crate::dicke::{
    dicke_dimension, local_entropy, steady_state_diagonal, steady_state_with,
    total_entropy, Block, DickeLayout, DickeState, SolverOptions, Superoperator,
};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermitian_eigenvalues, CMatrix, Lu};
use crate::lmg::LmgParams;
use crate::scalar::norm;
use crate::state_space::shannon_entropy;

pub const MAX_UNITS: usize = 4;

/// Null-space dimension test threshold, relative to `‖ℒ‖_F`.
pub const NULL_SPACE_TOL: f64 = 1e-10;

const INVERSE_ITERATIONS: usize = 60;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn check_units(n: usize) -> Result<()> {
    if n == 0 || n > MAX_UNITS {
        return Err(Error::InvalidParams(format!("oracle handles 1..={MAX_UNITS} units, got {n}")));
    }
    Ok(())
}

/// `op` acting on unit `i` of `n`.
fn on_unit(op: &CMatrix, i: usize, n: usize) -> CMatrix {
    let id = CMatrix::identity(2);
    let mut out = CMatrix::identity(1);
    for k in 0..n {
        out = out.kron(if k == i { op } else { &id });
    }
    out
}

/// Pauli matrices and `σ₊ = |↑⟩⟨↓|` in the `(↑, ↓)` basis.
fn paulis() -> [CMatrix; 4] {
    let z = c(0.0);
    let i = Complex64::new(0.0, 1.0);
    [
        CMatrix::from_row_major(2, 2, vec![z, c(1.0), c(1.0), z]),
        CMatrix::from_row_major(2, 2, vec![z, -i, i, z]),
        CMatrix::from_row_major(2, 2, vec![c(1.0), z, z, c(-1.0)]),
        CMatrix::from_row_major(2, 2, vec![z, c(1.0), z, z]),
    ]
}

/// Collective `V_α = Σ_i σ_α⁽ⁱ⁾` for `α = x, y, z`.
pub fn collective_paulis(n: usize) -> [CMatrix; 3] {
    let p = paulis();
    let d = 1 << n;
    let mut out = [CMatrix::zeros(d, d), CMatrix::zeros(d, d), CMatrix::zeros(d, d)];
    for i in 0..n {
        for (o, s) in out.iter_mut().zip(&p[..3]) {
            *o = o.add(&on_unit(s, i, n));
        }
    }
    out
}

/// Lindblad generator for `H` and jump operators `L_k`, column-stacked.
pub fn lindblad_generator(h: &CMatrix, jumps: &[CMatrix]) -> CMatrix {
    let d = h.rows();
    let id = CMatrix::identity(d);
    let mi = Complex64::new(0.0, -1.0);
    let mut l = id.kron(h).sub(&h.transpose().kron(&id)).scaled(mi);
    for jump in jumps {
        let ldl = jump.adjoint().matmul(jump);
        l = l
            .add(&jump.conjugate().kron(jump))
            .sub(&id.kron(&ldl).scaled(c(0.5)))
            .sub(&ldl.transpose().kron(&id).scaled(c(0.5)));
    }
    l
}

/// `H = 𝒥(V_x² + V_y²)/(4N) + (h/2)V_x`, jumps `√(Γ/N) V₋` and `√γ σ₊⁽ⁱ⁾`.
pub fn full_liouvillian(params: &LmgParams, n: usize) -> Result<CMatrix> {
    params.validate()?;
    check_units(n)?;
    let nf = n as f64;
    let [vx, vy, _] = collective_paulis(n);
    let h = vx
        .matmul(&vx)
        .add(&vy.matmul(&vy))
        .scaled(c(params.coupling / (4.0 * nf)))
        .add(&vx.scaled(c(0.5 * params.field)));
    let p = paulis();
    let mut v_minus = CMatrix::zeros(1 << n, 1 << n);
    for i in 0..n {
        v_minus = v_minus.add(&on_unit(&p[3].adjoint(), i, n));
    }
    let mut jumps = vec![v_minus.scaled(c((params.collective_rate / nf).sqrt()))];
    for i in 0..n {
        jumps.push(on_unit(&p[3], i, n).scaled(c(params.local_rate.sqrt())));
    }
    Ok(lindblad_generator(&h, &jumps))
}

/// Unique stationary state of a column-stacked generator on `d`-level states.
///
/// The null vector comes from inverse iteration; uniqueness is tested by
/// bordering: `ℒ + x̂ t†` (with `t = vec 𝟙`) is singular exactly when the
/// null space has a second direction.
pub fn stationary_state(l: &CMatrix, d: usize) -> Result<CMatrix> {
    let dim = d * d;
    if l.rows() != dim || l.cols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: l.rows() });
    }
    let scale = l.frobenius_norm().max(1.0);
    let lu = Lu::factor_with_perturbation(l, f64::EPSILON * scale);
    let trace_idx: Vec<usize> = (0..d).map(|a| a * d + a).collect();
    let mut x = vec![c(0.0); dim];
    for &i in &trace_idx {
        x[i] = c(1.0);
    }
    for _ in 0..INVERSE_ITERATIONS {
        let y = lu.solve(&x);
        let ny = norm(&y);
        if !ny.is_finite() || ny == 0.0 {
            return Err(Error::NonUniqueNullSpace { separation: 0.0 });
        }
        x = y.into_iter().map(|v| v / ny).collect();
    }
    let tr: Complex64 = trace_idx.iter().map(|&i| x[i]).sum();
    if tr.norm() < 1e-12 {
        return Err(Error::NonUniqueNullSpace { separation: 0.0 });
    }
    x.iter_mut().for_each(|v| *v /= tr);

    // bordered matrix ℒ + x̂ t†
    let mut b = l.clone();
    for (r, xr) in x.iter().enumerate() {
        for &k in &trace_idx {
            b[(r, k)] += *xr;
        }
    }
    let sigma = smallest_singular_value(&b);
    if sigma < NULL_SPACE_TOL * scale {
        return Err(Error::NonUniqueNullSpace { separation: sigma / scale });
    }

    let mut rho = CMatrix::from_fn(d, d, |r, col| x[col * d + r]);
    rho.hermitize();
    let tr = rho.trace().re;
    Ok(rho.scaled(c(1.0 / tr)))
}

/// `σ_min` by inverse iteration on `B†B` through LU factors of `B` and `B†`.
fn smallest_singular_value(b: &CMatrix) -> f64 {
    let n = b.rows();
    let tiny = f64::EPSILON * b.frobenius_norm();
    let lu = Lu::factor_with_perturbation(b, tiny);
    let lu_h = Lu::factor_with_perturbation(&b.adjoint(), tiny);
    if lu.perturbed_pivots > 0 {
        return 0.0;
    }
    let mut v: Vec<Complex64> = (0..n).map(|i| c(1.0 + (i % 7) as f64 * 0.1)).collect();
    let mut growth = 0.0;
    for _ in 0..INVERSE_ITERATIONS {
        let nv = norm(&v);
        v.iter_mut().for_each(|z| *z /= nv);
        let w = lu_h.solve(&v);
        v = lu.solve(&w);
        growth = norm(&v);
        if !growth.is_finite() {
            return 0.0;
        }
    }
    1.0 / growth.sqrt()
}

/// Density matrix of `N ≤ 4` units.
#[derive(Clone, Debug, PartialEq)]
pub struct FullState {
    n: usize,
    matrix: CMatrix,
}

impl FullState {
    pub fn new(n: usize, matrix: CMatrix) -> Result<Self> {
        check_units(n)?;
        if matrix.rows() != 1 << n || !matrix.is_square() {
            return Err(Error::DimensionMismatch { expected: 1 << n, got: matrix.rows() });
        }
        Ok(Self { n, matrix })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Reduced state of unit `i`.
    pub fn partial_trace(&self, i: usize) -> CMatrix {
        let d = 1 << self.n;
        let bit = self.n - 1 - i;
        let mut out = CMatrix::zeros(2, 2);
        for r in 0..d {
            for col in 0..d {
                // all other units must agree
                if (r ^ col) & !(1 << bit) != 0 {
                    continue;
                }
                out[((r >> bit) & 1, (col >> bit) & 1)] += self.matrix[(r, col)];
            }
        }
        out
    }

    /// `max ‖P ρ P† - ρ‖` over adjacent transpositions `P`.
    pub fn permutation_residual(&self) -> f64 {
        let d = 1 << self.n;
        let mut worst: f64 = 0.0;
        for i in 0..self.n.saturating_sub(1) {
            let (b1, b2) = (self.n - 1 - i, self.n - 2 - i);
            let swap = |s: usize| {
                let (x, y) = ((s >> b1) & 1, (s >> b2) & 1);
                (s & !(1 << b1) & !(1 << b2)) | (y << b1) | (x << b2)
            };
            for r in 0..d {
                for col in 0..d {
                    let diff = self.matrix[(swap(r), swap(col))] - self.matrix[(r, col)];
                    worst = worst.max(diff.norm());
                }
            }
        }
        worst
    }

    pub fn entropy(&self) -> f64 {
        let lambda: Vec<f64> = hermitian_eigenvalues(&self.matrix).into_iter().map(|v| v.max(0.0)).collect();
        shannon_entropy(&lambda)
    }

    pub fn local_entropies(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lambda: Vec<f64> = hermitian_eigenvalues(&self.partial_trace(i))
                    .into_iter()
                    .map(|v| v.max(0.0))
                    .collect();
                shannon_entropy(&lambda)
            })
            .collect()
    }

    /// Checks trace, Hermiticity and positivity within 1e-12 and
    /// permutation invariance within 1e-10.
    pub fn validate(&self) -> Result<()> {
        let tr = self.matrix.trace();
        if (tr - c(1.0)).norm() > 1e-12 {
            return Err(Error::InvalidParams(format!("trace {tr} != 1")));
        }
        if self.matrix.hermiticity_residual() > 1e-12 {
            return Err(Error::InvalidParams("state is not Hermitian".into()));
        }
        let min = hermitian_eigenvalues(&self.matrix).into_iter().fold(f64::INFINITY, f64::min);
        if min < -1e-12 {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        let perm = self.permutation_residual();
        if perm > 1e-10 {
            return Err(Error::InvalidParams(format!("permutation residual {perm:e}")));
        }
        Ok(())
    }
}

pub fn brute_force_steady_state(params: &LmgParams, n: usize) -> Result<FullState> {
    let l = full_liouvillian(params, n)?;
    FullState::new(n, stationary_state(&l, 1 << n)?)
}

/// `(Σ_i S(ρ_i) - S(ρ_T)) / N`.
pub fn brute_force_mutual_info(rho: &FullState) -> f64 {
    let local: f64 = rho.local_entropies().iter().sum();
    (local - rho.entropy()) / rho.n as f64
}

/// Coupled basis `|J, J_z, α⟩`: for each sector (ascending `J`), the kets
/// as columns indexed by `α * (2J+1) + row`.
pub fn coupled_basis(n: usize) -> Result<Vec<CMatrix>> {
    check_units(n)?;
    let d = 1 << n;
    let [vx, vy, vz] = collective_paulis(n);
    let half = |m: &CMatrix| m.scaled(c(0.5));
    let (jx, jy, jz) = (half(&vx), half(&vy), half(&vz));
    let j2 = jx.matmul(&jx).add(&jy.matmul(&jy)).add(&jz.matmul(&jz));
    let j_minus = jx.sub(&jy.scaled(Complex64::new(0.0, 1.0)));
    let layout = DickeLayout::new(n)?;
    let mut out = Vec::new();
    for s in layout.sectors() {
        let j = s.j();
        let mult = dicke_dimension(n, s.two_j)? as usize;
        // states with J_z = J have (N/2 + J) units up
        let ups = (n + s.two_j) / 2;
        let sub: Vec<usize> = (0..d).filter(|&k| (n - (k as u32).count_ones() as usize) == ups).collect();
        let proj = CMatrix::from_fn(sub.len(), sub.len(), |a, b| j2[(sub[a], sub[b])]);
        let eig = hermitian_eigen(&proj);
        let top: Vec<usize> = (0..sub.len())
            .filter(|&k| (eig.values[k] - j * (j + 1.0)).abs() < 1e-8)
            .collect();
        if top.len() != mult {
            return Err(Error::InvalidParams(format!(
                "found {} highest-weight states for 2J = {}, expected {mult}",
                top.len(),
                s.two_j
            )));
        }
        let size = s.size();
        let mut kets = CMatrix::zeros(d, mult * size);
        for (alpha, &k) in top.iter().enumerate() {
            let mut v = vec![c(0.0); d];
            for (idx, &state) in sub.iter().enumerate() {
                v[state] = eig.vectors[(idx, k)];
            }
            // rows are J_z ascending; fill from the top
            for row in (0..size).rev() {
                for (r, vr) in v.iter().enumerate() {
                    kets[(r, alpha * size + row)] = *vr;
                }
                if row > 0 {
                    let lowered = j_minus.matvec(&v);
                    let nl = norm(&lowered);
                    v = lowered.into_iter().map(|z| z / nl).collect();
                }
            }
        }
        out.push(kets);
    }
    Ok(out)
}

/// `ρ_T = ⊕_J ρ_J ⊗ 𝟙/dim_J` written out in the product basis.
pub fn embed(state: &DickeState) -> Result<FullState> {
    let n = state.n();
    let basis = coupled_basis(n)?;
    let d = 1 << n;
    let mut rho = CMatrix::zeros(d, d);
    for ((s, block), kets) in state.layout().sectors().iter().zip(state.blocks()).zip(&basis) {
        let size = s.size();
        let mult = kets.cols() / size;
        let w = 1.0 / mult as f64;
        for alpha in 0..mult {
            for a in 0..size {
                for b in 0..size {
                    let v = block.entry(a, b) * w;
                    if v == c(0.0) {
                        continue;
                    }
                    for r in 0..d {
                        let ka = kets[(r, alpha * size + a)];
                        if ka == c(0.0) {
                            continue;
                        }
                        for col in 0..d {
                            rho[(r, col)] += ka * v * kets[(col, alpha * size + b)].conj();
                        }
                    }
                }
            }
        }
    }
    FullState::new(n, rho)
}

/// Sector blocks `ρ_J[a][b] = Σ_α ⟨J,a,α|ρ|J,b,α⟩`.
pub fn project(rho: &FullState) -> Result<DickeState> {
    let n = rho.n;
    let basis = coupled_basis(n)?;
    let layout = DickeLayout::new(n)?;
    let mut blocks = Vec::new();
    for (s, kets) in layout.sectors().iter().zip(&basis) {
        let size = s.size();
        let mult = kets.cols() / size;
        let mut block = CMatrix::zeros(size, size);
        for alpha in 0..mult {
            for a in 0..size {
                let bra: Vec<Complex64> = (0..1 << n).map(|r| kets[(r, alpha * size + a)].conj()).collect();
                let row: Vec<Complex64> = (0..1 << n)
                    .map(|col| bra.iter().enumerate().map(|(r, z)| *z * rho.matrix[(r, col)]).sum())
                    .collect();
                for b in 0..size {
                    block[(a, b)] += (0..1 << n).map(|col| row[col] * kets[(col, alpha * size + b)]).sum::<Complex64>();
                }
            }
        }
        blocks.push(Block::Dense(block));
    }
    DickeState::new(layout, blocks)
}

/// Agreement between the sector solvers and the brute-force reference.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct OracleComparison {
    pub n: usize,
    /// Largest elementwise deviation of the embedded general-solver state.
    pub max_state_deviation: f64,
    pub mutual_info_diff: f64,
    pub entropy_diff: f64,
    /// Population deviation of the `h = 0` solver, when applicable.
    pub diagonal_deviation: Option<f64>,
    pub oracle_mutual_info: f64,
    pub solver_mutual_info: f64,
}

impl OracleComparison {
    pub fn worst(&self) -> f64 {
        [self.max_state_deviation, self.mutual_info_diff, self.entropy_diff, self.diagonal_deviation.unwrap_or(0.0)]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.worst() < tol
    }
}

pub fn compare_with_oracle(params: &LmgParams, n: usize) -> Result<OracleComparison> {
    let reference = brute_force_steady_state(params, n)?;
    let opts = SolverOptions::default();
    let op = Superoperator::build(params, n, None, false)?;
    let (general, _) = steady_state_with(&op, &opts)?;
    let embedded = embed(&general)?;
    let max_state_deviation = embedded.matrix.sub(&reference.matrix).max_abs();

    let oracle_mi = brute_force_mutual_info(&reference);
    let s_total = total_entropy(&general)?;
    let solver_mi = if n == 1 { 0.0 } else { local_entropy(&general)? - s_total / n as f64 };
    let diagonal_deviation = if params.field == 0.0 {
        let (diag, _) = steady_state_diagonal(params, n, &opts)?;
        let projected = project(&reference)?;
        let dev = diag
            .populations()
            .iter()
            .flatten()
            .zip(projected.populations().iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Some(dev)
    } else {
        None
    };
    Ok(OracleComparison {
        n,
        max_state_deviation,
        mutual_info_diff: (oracle_mi - solver_mi).abs(),
        entropy_diff: (reference.entropy() - s_total).abs(),
        diagonal_deviation,
        oracle_mutual_info: oracle_mi,
        solver_mutual_info: solver_mi,
    })
}

#[cfg(test)]
mod tests;
