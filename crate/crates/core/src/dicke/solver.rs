//! Steady states by CGLS on `[ℒ; t†] x = [0; 1]`, where `t` selects the
//! diagonal entries, so that the normal equations read `(ℒ†ℒ + t t†) x = t`.

use num_complex::Complex64;

use super::liouvillian::Superoperator;
use super::{
    local_entropy, local_magnetization, total_entropy, Block, DickeLayout, DickeState,
};
use crate::error::{Error, Result};
use crate::krylov::{cgls, gmres, CglsOptions, LinearOperator};
use crate::lmg::LmgParams;
use crate::scalar::{norm, Scalar};
use crate::sparse::{Csr, Ilu0};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// CGLS on the full superoperator.
    General,
    /// CGLS on the population rate equations (`h = 0`).
    Diagonal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Required `‖ℒx‖ / ‖x‖` of the returned, normalized state.
    pub tolerance: f64,
    /// Stopping threshold inside CGLS; tighter than `tolerance` so that the
    /// final Hermitization and normalization stay within it.
    pub cg_target: f64,
    /// Defaults to ten times the number of unknowns.
    pub max_iterations: Option<usize>,
    pub mem_cap_mb: Option<usize>,
    pub matrix_free: bool,
    /// Solve a second time from the maximally mixed start and compare.
    pub check_uniqueness: bool,
    /// Relative distance above which two converged solutions count as distinct.
    pub uniqueness_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            cg_target: 1e-11,
            max_iterations: None,
            mem_cap_mb: None,
            matrix_free: false,
            check_uniqueness: false,
            uniqueness_tol: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolveInfo {
    pub kind: SolverKind,
    pub iterations: usize,
    /// `‖ℒx‖ / ‖x‖` of the returned state.
    pub residual: f64,
    pub matrix_free: bool,
}

/// `[A; t†]` for a set of trace positions `t`.
struct Augmented<'a, T, A: ?Sized> {
    op: &'a A,
    trace: &'a [usize],
    _scalar: std::marker::PhantomData<T>,
}

impl<'a, T: Scalar, A: LinearOperator<T> + ?Sized> LinearOperator<T> for Augmented<'a, T, A> {
    fn nrows(&self) -> usize {
        self.op.nrows() + 1
    }
    fn ncols(&self) -> usize {
        self.op.ncols()
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        let (head, tail) = y.split_at_mut(self.op.nrows());
        self.op.apply(x, head);
        tail[0] = self.trace.iter().map(|&i| x[i]).sum();
    }
    fn apply_adjoint(&self, y: &[T], x: &mut [T]) {
        let n = self.op.nrows();
        self.op.apply_adjoint(&y[..n], x);
        for &i in self.trace {
            x[i] += y[n];
        }
    }
}

/// Runs CGLS and returns `(x, iterations)`; `x` has unit trace on `trace`.
fn solve_augmented<T, A>(
    op: &A,
    trace: &[usize],
    column_norms_sq: Vec<f64>,
    x0: Vec<T>,
    opts: &SolverOptions,
) -> Result<(Vec<T>, usize)>
where
    T: Scalar,
    A: LinearOperator<T> + ?Sized,
{
    let dim = op.ncols();
    let aug = Augmented {
        op,
        trace,
        _scalar: std::marker::PhantomData,
    };
    let mut col = column_norms_sq;
    for &i in trace {
        col[i] += 1.0;
    }
    let scale: Vec<f64> = col
        .iter()
        .map(|c| if *c > 0.0 { 1.0 / c.sqrt() } else { 1.0 })
        .collect();
    let mut b = vec![T::zero(); dim + 1];
    b[dim] = T::one();
    let cg = CglsOptions {
        max_iterations: opts.max_iterations.unwrap_or(10 * dim),
        ..CglsOptions::default()
    };
    let target = opts.cg_target;
    let mut achieved = f64::INFINITY;
    let out = cgls(&aug, &b, x0, &scale, &cg, |r, x| {
        let xn = norm(x);
        let rel = norm(&r[..dim]) / xn.max(f64::MIN_POSITIVE);
        achieved = rel.max(r[dim].modulus());
        rel <= target && r[dim].modulus() <= target
    });
    if !out.converged {
        return Err(Error::CgNotConverged {
            iterations: out.iterations,
            residual: achieved,
        });
    }
    Ok((out.x, out.iterations))
}

fn relative_residual<A: LinearOperator<Complex64> + ?Sized>(op: &A, x: &[Complex64]) -> f64 {
    let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
    op.apply(x, &mut y);
    norm(&y) / norm(x)
}

/// `x ← (x + x‡)/2` blockwise, then unit trace.
fn hermitize_and_normalize(layout: &DickeLayout, x: &mut [Complex64]) {
    for s in layout.sectors() {
        let n = s.size();
        for a in 0..n {
            for b in a..n {
                let (i, j) = (s.offset + a * n + b, s.offset + b * n + a);
                let v = 0.5 * (x[i] + x[j].conj());
                x[i] = v;
                x[j] = v.conj();
            }
        }
    }
    let tr: f64 = layout.trace_indices().iter().map(|&i| x[i].re).sum();
    x.iter_mut().for_each(|v| *v /= tr);
}

/// Steady state of `op` with default options.
pub fn steady_state(op: &Superoperator) -> Result<DickeState> {
    steady_state_with(op, &SolverOptions::default()).map(|(s, _)| s)
}

pub fn steady_state_with(op: &Superoperator, opts: &SolverOptions) -> Result<(DickeState, SolveInfo)> {
    stationary(op, op.layout().clone(), op.column_norms_sq(), op.is_matrix_free(), opts)
}

fn stationary<A: LinearOperator<Complex64> + ?Sized>(
    op: &A,
    layout: DickeLayout,
    col: Vec<f64>,
    matrix_free: bool,
    opts: &SolverOptions,
) -> Result<(DickeState, SolveInfo)> {
    let dim = layout.dim();
    let trace = layout.trace_indices();

    let mut pumped = vec![Complex64::new(0.0, 0.0); dim];
    pumped[dim - 1] = Complex64::new(1.0, 0.0);
    let (mut x, iterations) = solve_augmented(op, &trace, col.clone(), pumped, opts)?;
    hermitize_and_normalize(&layout, &mut x);
    let residual = relative_residual(op, &x);
    if !(residual < opts.tolerance) {
        return Err(Error::CgNotConverged { iterations, residual });
    }

    if opts.check_uniqueness {
        let mut mixed = vec![Complex64::new(0.0, 0.0); dim];
        let w = 1.0 / trace.len() as f64;
        for &i in &trace {
            mixed[i] = Complex64::new(w, 0.0);
        }
        // a second converged solution at a different point spans a second null direction
        if let Ok((mut y, _)) = solve_augmented(op, &trace, col, mixed, opts) {
            hermitize_and_normalize(&layout, &mut y);
            if relative_residual(op, &y) < opts.tolerance {
                let diff: Vec<Complex64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                let separation = norm(&diff) / norm(&x);
                if separation > opts.uniqueness_tol {
                    return Err(Error::NonUniqueNullSpace { separation });
                }
            }
        }
    }

    let state = DickeState::from_vector(layout, &x)?;
    Ok((
        state,
        SolveInfo {
            kind: SolverKind::General,
            iterations,
            residual,
            matrix_free,
        },
    ))
}

/// Offsets of the `(J, J_z)` populations, sectors ascending.
fn population_offsets(layout: &DickeLayout) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(layout.sectors().len());
    let mut total = 0;
    for s in layout.sectors() {
        offsets.push(total);
        total += s.size();
    }
    (offsets, total)
}

/// Generator of the `h = 0` population dynamics,
/// `dp_{J,Jz}/dt = -C₁ p_{J,Jz} + C₂ p_{J,Jz+1} + C₃ p_{J+1,Jz-1} + C₄ p_{J,Jz-1} + C₅ p_{J-1,Jz-1}`.
pub fn rate_matrix(params: &LmgParams, n: usize) -> Result<Csr<f64>> {
    params.validate()?;
    let layout = DickeLayout::new(n)?;
    let (offsets, dim) = population_offsets(&layout);
    let nf = n as f64;
    let half = 0.5 * nf;
    let (gc, gl) = (params.collective_rate, params.local_rate);
    let mut rows = Vec::with_capacity(dim);
    for (k, s) in layout.sectors().iter().enumerate() {
        for a in 0..s.size() {
            rows.push((k, a));
        }
    }
    let sectors = layout.sectors();
    Ok(Csr::from_rows(dim, dim, |i, push| {
        let (k, a) = rows[i];
        let s = sectors[k];
        let (j, m) = (s.j(), s.m(a));
        let c1 = gc / nf * (1.0 + j - m) * (j + m) + gl * (half - m);
        push(i, -c1);
        if a + 1 < s.size() {
            push(i + 1, gc / nf * (j - m) * (j + m + 1.0));
        }
        if k + 1 < sectors.len() {
            let c3 = gl * (j - m + 1.0) * (j - m + 2.0) * (half + j + 2.0) / (2.0 * (j + 1.0) * (2.0 * j + 3.0));
            push(offsets[k + 1] + a, c3);
        }
        if a > 0 && s.two_j > 0 {
            let c4 = gl * (j - m + 1.0) * (j + m) * (half + 1.0) / (2.0 * j * (j + 1.0));
            push(i - 1, c4);
        }
        if k > 0 && a >= 2 {
            let c5 = gl * (j + m - 1.0) * (j + m) * (half - j + 1.0) / (2.0 * j * (2.0 * j - 1.0));
            push(offsets[k - 1] + a - 2, c5);
        }
    }))
}

struct RealPair {
    a: Csr<f64>,
    ah: Csr<f64>,
}

impl LinearOperator<f64> for RealPair {
    fn nrows(&self) -> usize {
        self.a.nrows()
    }
    fn ncols(&self) -> usize {
        self.a.ncols()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.a.matvec(x, y);
    }
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        self.ah.matvec(y, x);
    }
}

/// Solves `W p = 0, Σ p = 1`: GMRES preconditioned by ILU(0) on `W` with
/// its last row (the fully pumped state) replaced by the normalization,
/// falling back to CGLS on `[W; 1ᵀ]`.
fn solve_rates(w: &Csr<f64>, opts: &SolverOptions) -> Result<(Vec<f64>, usize)> {
    let dim = w.nrows();
    let bordered = Csr::from_rows(dim, dim, |i, push| {
        if i + 1 == dim {
            (0..dim).for_each(|c| push(c, 1.0));
        } else {
            w.row(i).for_each(|(c, v)| push(c, v));
        }
    });
    let pair = RealPair {
        ah: bordered.adjoint(),
        a: bordered,
    };
    let mut b = vec![0.0; dim];
    b[dim - 1] = 1.0;
    let max_iterations = opts.max_iterations.unwrap_or(10 * dim);
    if let Some(ilu) = Ilu0::new(&pair.a) {
        let out = gmres(&pair, &b, b.clone(), |r, z| ilu.solve(r, z), GMRES_RESTART, max_iterations, opts.cg_target * 1e-2);
        if out.converged {
            return Ok((out.x, out.iterations));
        }
    }
    let rates = RealPair {
        ah: w.adjoint(),
        a: w.clone(),
    };
    let trace: Vec<usize> = (0..dim).collect();
    solve_augmented(&rates, &trace, w.column_norms_sq(), b, opts).map_err(|e| match e {
        Error::CgNotConverged { residual, .. } => Error::SingularRateMatrix { residual },
        other => other,
    })
}

const GMRES_RESTART: usize = 60;

/// Stationary populations at `h = 0`, returned as diagonal blocks.
pub fn steady_state_diagonal(
    params: &LmgParams,
    n: usize,
    opts: &SolverOptions,
) -> Result<(DickeState, SolveInfo)> {
    if params.field != 0.0 {
        return Err(Error::InvalidParams(format!(
            "population equations need zero field, got h = {}",
            params.field
        )));
    }
    let layout = DickeLayout::new(n)?;
    let w = rate_matrix(params, n)?;
    let (mut p, iterations) = solve_rates(&w, opts)?;
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    // small negative populations are solver noise and clamped below
    if min < -opts.tolerance {
        return Err(Error::SingularRateMatrix { residual: min });
    }
    p.iter_mut().for_each(|v| *v = v.max(0.0));
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    let mut wp = vec![0.0; p.len()];
    w.matvec(&p, &mut wp);
    let residual = norm(&wp) / norm(&p);
    if !(residual < opts.tolerance) {
        return Err(Error::SingularRateMatrix { residual });
    }
    let (offsets, _) = population_offsets(&layout);
    let blocks = layout
        .sectors()
        .iter()
        .zip(&offsets)
        .map(|(s, &o)| Block::Diagonal(p[o..o + s.size()].to_vec()))
        .collect();
    Ok((
        DickeState::new(layout, blocks)?,
        SolveInfo {
            kind: SolverKind::Diagonal,
            iterations,
            residual,
            matrix_free: false,
        },
    ))
}

/// Solves at `(params, N)`, using the population equations when `h = 0`.
pub fn solve_lmg(params: &LmgParams, n: usize, opts: &SolverOptions) -> Result<(DickeState, SolveInfo)> {
    if params.field == 0.0 {
        steady_state_diagonal(params, n, opts)
    } else {
        let op = Superoperator::build(params, n, opts.mem_cap_mb, opts.matrix_free)?;
        steady_state_with(&op, opts)
    }
}

/// `‖ℒx‖ / ‖x‖` of `state` under the generator at `params`; population-only
/// states at zero field are checked against the rate equations.
pub fn state_residual(params: &LmgParams, state: &DickeState, opts: &SolverOptions) -> Result<f64> {
    let n = state.n();
    if params.field == 0.0 && state.blocks().iter().all(|b| matches!(b, Block::Diagonal(_))) {
        let w = rate_matrix(params, n)?;
        let p: Vec<f64> = state.populations().concat();
        let mut wp = vec![0.0; p.len()];
        w.matvec(&p, &mut wp);
        return Ok(norm(&wp) / norm(&p));
    }
    let op = Superoperator::build(params, n, opts.mem_cap_mb, opts.matrix_free)?;
    Ok(relative_residual(&op, &state.to_vector()))
}

/// Correlation measures of a solved finite-N state.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FiniteResult {
    pub n: usize,
    /// `I_M / N`, clamped at zero.
    pub mutual_info: f64,
    /// `S(ρ_i) - S(ρ_T)/N` before clamping.
    pub raw_mutual_info: f64,
    /// `S(ρ_T)`.
    pub total_entropy: f64,
    /// `S(ρ_i)`.
    pub local_entropy: f64,
    pub magnetization: [f64; 3],
    pub info: SolveInfo,
}

impl FiniteResult {
    pub fn from_state(state: &DickeState, info: SolveInfo) -> Result<Self> {
        let n = state.n();
        let magnetization = local_magnetization(state);
        let s_local = local_entropy(state)?;
        let s_total = total_entropy(state)?;
        // a single unit is its own marginal
        let raw = if n == 1 { 0.0 } else { s_local - s_total / n as f64 };
        Ok(Self {
            n,
            mutual_info: raw.max(0.0),
            raw_mutual_info: raw,
            total_entropy: s_total,
            local_entropy: s_local,
            magnetization,
            info,
        })
    }

    /// `√(⟨m_x⟩² + ⟨m_y⟩²)`.
    pub fn transverse_magnetization(&self) -> f64 {
        self.magnetization[0].hypot(self.magnetization[1])
    }
}

pub fn finite_analysis(params: &LmgParams, n: usize, opts: &SolverOptions) -> Result<FiniteResult> {
    let (state, info) = solve_lmg(params, n, opts)?;
    FiniteResult::from_state(&state, info)
}

/// `I_M / N` of the steady state at `(params, N)`.
pub fn finite_mutual_info(params: &LmgParams, n: usize) -> Result<f64> {
    finite_analysis(params, n, &SolverOptions::default()).map(|r| r.mutual_info)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Zero(usize);

    impl LinearOperator<Complex64> for Zero {
        fn nrows(&self) -> usize {
            self.0
        }
        fn ncols(&self) -> usize {
            self.0
        }
        fn apply(&self, _: &[Complex64], y: &mut [Complex64]) {
            y.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        }
        fn apply_adjoint(&self, _: &[Complex64], x: &mut [Complex64]) {
            x.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn every_state_stationary_is_not_unique() {
        let layout = DickeLayout::new(3).unwrap();
        let op = Zero(layout.dim());
        let opts = SolverOptions {
            check_uniqueness: true,
            ..SolverOptions::default()
        };
        let err = stationary(&op, layout.clone(), vec![0.0; layout.dim()], false, &opts).unwrap_err();
        assert!(matches!(err, Error::NonUniqueNullSpace { .. }), "{err:?}");
        // without the check the first start is accepted
        let plain = SolverOptions::default();
        let (s, _) = stationary(&op, layout.clone(), vec![0.0; layout.dim()], false, &plain).unwrap();
        assert_eq!(s.weights().last().copied(), Some(1.0));
    }
}
