//! Permutation-symmetric states of `N` qubits in the Dicke-sector
//! representation `ρ_T = ⊕_J ρ_J ⊗ 𝟙_{dim_J} / dim_J`.
//!
//! Total angular momenta are stored as `two_j = 2J` and magnetic numbers as
//! `two_m = 2 J_z`. Within a sector, row/column `a` is `J_z = a - J`.

mod checkpoint;
mod liouvillian;
mod solver;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use liouvillian::{
    assemble_liouvillian, assemble_liouvillian_with_cap, estimate_memory_mb, MatrixFreeLiouvillian,
    SparseSuperoperator, Superoperator, MATRIX_FREE_THRESHOLD,
};
pub use solver::{
    finite_analysis, finite_mutual_info, rate_matrix, solve_lmg, steady_state,
    state_residual, steady_state_diagonal, steady_state_with, FiniteResult, SolveInfo, SolverKind, SolverOptions,
};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, CMatrix};
use crate::state_space::{binary_entropy, shannon_entropy};

/// One total-angular-momentum sector and its offset in the vectorized layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sector {
    pub two_j: usize,
    pub offset: usize,
}

impl Sector {
    pub fn size(&self) -> usize {
        self.two_j + 1
    }

    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    /// `J_z` of row `a`.
    pub fn m(&self, a: usize) -> f64 {
        a as f64 - self.j()
    }
}

/// Vectorized layout: sectors by ascending `J`, each block row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DickeLayout {
    n: usize,
    sectors: Vec<Sector>,
    dim: usize,
}

impl DickeLayout {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::IndexError("need at least one unit".into()));
        }
        let mut sectors = Vec::new();
        let mut offset = 0;
        for two_j in ((n % 2)..=n).step_by(2) {
            sectors.push(Sector { two_j, offset });
            offset += (two_j + 1) * (two_j + 1);
        }
        Ok(Self {
            n,
            sectors,
            dim: offset,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Position of sector `two_j` in [`Self::sectors`].
    pub fn sector_position(&self, two_j: usize) -> Option<usize> {
        if two_j > self.n || !(self.n - two_j).is_multiple_of(2) {
            return None;
        }
        Some((two_j - self.n % 2) / 2)
    }

    /// Zero-based vector index of `ρ_{J, J_z, J_z'}`.
    pub fn index(&self, two_j: usize, two_m: i64, two_m2: i64) -> Result<usize> {
        let s = self
            .sector_position(two_j)
            .map(|k| self.sectors[k])
            .ok_or_else(|| Error::IndexError(format!("2J = {two_j} not allowed for N = {}", self.n)))?;
        let row = ladder_row(two_j, two_m)?;
        let col = ladder_row(two_j, two_m2)?;
        Ok(s.offset + row * s.size() + col)
    }

    /// Inverse of [`Self::index`]: `(sector position, row, column)`.
    pub fn locate(&self, i: usize) -> (usize, usize, usize) {
        let k = self.sectors.partition_point(|s| s.offset <= i) - 1;
        let s = self.sectors[k];
        let local = i - s.offset;
        (k, local / s.size(), local % s.size())
    }

    /// Indices of the diagonal entries, i.e. the support of the trace functional.
    pub fn trace_indices(&self) -> Vec<usize> {
        self.sectors
            .iter()
            .flat_map(|s| (0..s.size()).map(move |a| s.offset + a * s.size() + a))
            .collect()
    }
}

fn ladder_row(two_j: usize, two_m: i64) -> Result<usize> {
    let shifted = two_m + two_j as i64;
    if shifted < 0 || shifted > 2 * two_j as i64 || shifted % 2 != 0 {
        return Err(Error::IndexError(format!("2J_z = {two_m} outside sector 2J = {two_j}")));
    }
    Ok((shifted / 2) as usize)
}

fn check_sector(n: usize, two_j: usize) -> Result<()> {
    if n == 0 || two_j > n || !(n - two_j).is_multiple_of(2) {
        return Err(Error::IndexError(format!("2J = {two_j} not allowed for N = {n}")));
    }
    Ok(())
}

fn binomial(n: usize, k: usize) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by i + 1
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Multiplicity of spin `J` among `N` qubits, `C(N, k) - C(N, k - 1)` with
/// `k = N/2 - J`, which equals `(2J+1) N! / ((N/2+J+1)! (N/2-J)!)`.
pub fn dicke_dimension(n: usize, two_j: usize) -> Result<u128> {
    check_sector(n, two_j)?;
    let k = (n - two_j) / 2;
    let overflow = || Error::DomainError {
        value: n as f64,
        domain: "unit counts whose multiplicities fit in 128 bits",
    };
    let upper = binomial(n, k).ok_or_else(overflow)?;
    let lower = if k == 0 { 0 } else { binomial(n, k - 1).ok_or_else(overflow)? };
    Ok(upper - lower)
}

/// `ln n!` for `n = 0..=max`.
#[derive(Clone, Debug)]
pub struct LogFactorials(Vec<f64>);

impl LogFactorials {
    pub fn new(max: usize) -> Self {
        let mut v = Vec::with_capacity(max + 1);
        v.push(0.0);
        let mut acc = 0.0;
        for k in 1..=max {
            acc += (k as f64).ln();
            v.push(acc);
        }
        Self(v)
    }

    pub fn get(&self, n: usize) -> f64 {
        self.0[n]
    }

    /// `ln dim_J` for `N = self.max`.
    pub fn ln_dicke_dimension(&self, n: usize, two_j: usize) -> f64 {
        let up = (n + two_j) / 2;
        let down = (n - two_j) / 2;
        ((two_j + 1) as f64).ln() + self.get(n) - self.get(up + 1) - self.get(down)
    }
}

/// `ln dim_J`, usable far beyond the range of exact integers.
pub fn ln_dicke_dimension(n: usize, two_j: usize) -> Result<f64> {
    check_sector(n, two_j)?;
    Ok(LogFactorials::new(n + 1).ln_dicke_dimension(n, two_j))
}

/// `√(J(J+1) - m(m+1))`, the `J₊` matrix element from `m` to `m+1`.
pub fn raising(j: f64, m: f64) -> f64 {
    (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

/// `(Ĵx, Ĵy, Ĵz)` for spin `J = two_j / 2`, basis `J_z = -J, …, J`.
pub fn spin_operators(two_j: usize) -> [CMatrix; 3] {
    let size = two_j + 1;
    let j = two_j as f64 / 2.0;
    let mut jx = CMatrix::zeros(size, size);
    let mut jy = CMatrix::zeros(size, size);
    let mut jz = CMatrix::zeros(size, size);
    for a in 0..size {
        let m = a as f64 - j;
        jz[(a, a)] = Complex64::new(m, 0.0);
        if a + 1 < size {
            let c = 0.5 * raising(j, m);
            jx[(a + 1, a)] = Complex64::new(c, 0.0);
            jx[(a, a + 1)] = Complex64::new(c, 0.0);
            jy[(a + 1, a)] = Complex64::new(0.0, -c);
            jy[(a, a + 1)] = Complex64::new(0.0, c);
        }
    }
    [jx, jy, jz]
}

/// Block `ρ_J` (trace `p_J`, not normalized).
#[derive(Clone, Debug, PartialEq)]
pub enum Block {
    Dense(CMatrix),
    /// Populations only; coherences vanish.
    Diagonal(Vec<f64>),
}

impl Block {
    pub fn size(&self) -> usize {
        match self {
            Block::Dense(m) => m.rows(),
            Block::Diagonal(d) => d.len(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Block::Dense(m) => m.trace().re,
            Block::Diagonal(d) => d.iter().sum(),
        }
    }

    pub fn entry(&self, a: usize, b: usize) -> Complex64 {
        match self {
            Block::Dense(m) => m[(a, b)],
            Block::Diagonal(d) if a == b => Complex64::new(d[a], 0.0),
            Block::Diagonal(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match self {
            Block::Dense(m) => m.clone(),
            Block::Diagonal(d) => CMatrix::diagonal(&d.iter().map(|v| Complex64::new(*v, 0.0)).collect::<Vec<_>>()),
        }
    }

    fn eigenvalues(&self) -> Vec<f64> {
        match self {
            Block::Dense(m) => hermitian_eigenvalues(m),
            Block::Diagonal(d) => d.clone(),
        }
    }
}

/// Tolerance on negative block eigenvalues, relative to the total trace.
pub const BLOCK_NEGATIVITY_TOL: f64 = 1e-10;

/// Permutation-symmetric state: one block per allowed `J`, ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct DickeState {
    layout: DickeLayout,
    blocks: Vec<Block>,
}

impl DickeState {
    pub fn new(layout: DickeLayout, blocks: Vec<Block>) -> Result<Self> {
        if blocks.len() != layout.sectors().len() {
            return Err(Error::DimensionMismatch {
                expected: layout.sectors().len(),
                got: blocks.len(),
            });
        }
        for (s, b) in layout.sectors().iter().zip(&blocks) {
            if b.size() != s.size() {
                return Err(Error::DimensionMismatch {
                    expected: s.size(),
                    got: b.size(),
                });
            }
        }
        Ok(Self { layout, blocks })
    }

    /// Dense blocks read from the vectorized layout.
    pub fn from_vector(layout: DickeLayout, x: &[Complex64]) -> Result<Self> {
        if x.len() != layout.dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.dim(),
                got: x.len(),
            });
        }
        let blocks = layout
            .sectors()
            .iter()
            .map(|s| {
                let len = s.size() * s.size();
                Block::Dense(CMatrix::from_row_major(
                    s.size(),
                    s.size(),
                    x[s.offset..s.offset + len].to_vec(),
                ))
            })
            .collect();
        Ok(Self { layout, blocks })
    }

    pub fn to_vector(&self) -> Vec<Complex64> {
        let mut x = vec![Complex64::new(0.0, 0.0); self.layout.dim()];
        for (s, b) in self.layout.sectors().iter().zip(&self.blocks) {
            for a in 0..s.size() {
                for c in 0..s.size() {
                    x[s.offset + a * s.size() + c] = b.entry(a, c);
                }
            }
        }
        x
    }

    /// `|J, J_z⟩⟨J, J_z|`.
    pub fn pure_dicke(n: usize, two_j: usize, two_m: i64) -> Result<Self> {
        let layout = DickeLayout::new(n)?;
        let target = layout.index(two_j, two_m, two_m)?;
        let blocks = layout
            .sectors()
            .iter()
            .map(|s| {
                let mut d = vec![0.0; s.size()];
                if target >= s.offset && target < s.offset + s.size() * s.size() {
                    let local = target - s.offset;
                    d[local / s.size()] = 1.0;
                }
                Block::Diagonal(d)
            })
            .collect();
        Ok(Self { layout, blocks })
    }

    /// `𝟙/2^N`, i.e. `p_J = (2J+1) dim_J / 2^N` with `ρ̄_J ∝ 𝟙`.
    pub fn maximally_mixed(n: usize) -> Result<Self> {
        let layout = DickeLayout::new(n)?;
        let lf = LogFactorials::new(n + 1);
        let blocks = layout
            .sectors()
            .iter()
            .map(|s| {
                let w = (lf.ln_dicke_dimension(n, s.two_j) - n as f64 * std::f64::consts::LN_2).exp();
                Block::Diagonal(vec![w; s.size()])
            })
            .collect();
        Ok(Self { layout, blocks })
    }

    pub fn n(&self) -> usize {
        self.layout.n()
    }

    pub fn layout(&self) -> &DickeLayout {
        &self.layout
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// `p_J` per sector.
    pub fn weights(&self) -> Vec<f64> {
        self.blocks.iter().map(Block::trace).collect()
    }

    /// `ρ_J / p_J`, or `None` for an empty sector.
    pub fn normalized_block(&self, k: usize) -> Option<CMatrix> {
        let p = self.blocks[k].trace();
        (p > 0.0).then(|| self.blocks[k].to_dense().scaled(Complex64::new(1.0 / p, 0.0)))
    }

    pub fn hermiticity_residual(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| match b {
                Block::Dense(m) => m.hermiticity_residual(),
                Block::Diagonal(_) => 0.0,
            })
            .fold(0.0, f64::max)
    }

    /// Checks unit trace, Hermiticity and positivity within 1e-10.
    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.weights().iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParams(format!("trace {total} != 1")));
        }
        let herm = self.hermiticity_residual();
        if herm > 1e-10 {
            return Err(Error::InvalidParams(format!("Hermiticity residual {herm:e}")));
        }
        for b in &self.blocks {
            let min = b.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
            if min < -BLOCK_NEGATIVITY_TOL {
                return Err(Error::NotPositive { min_eigenvalue: min });
            }
        }
        Ok(())
    }

    /// Populations `ρ_{J, J_z, J_z}` in layout order.
    pub fn populations(&self) -> Vec<Vec<f64>> {
        self.blocks
            .iter()
            .map(|b| (0..b.size()).map(|a| b.entry(a, a).re).collect())
            .collect()
    }
}

/// `S(ρ_T) = Σ_J p_J [-ln p_J + S(ρ̄_J) + ln dim_J]`, evaluated as
/// `Σ_J [-Σ_k λ_k ln λ_k + p_J ln dim_J]` over eigenvalues `λ_k` of the
/// unnormalized blocks so that nearly empty sectors stay well conditioned.
pub fn total_entropy(s: &DickeState) -> Result<f64> {
    let n = s.n();
    let lf = LogFactorials::new(n + 1);
    let mut total = 0.0;
    for (sector, block) in s.layout.sectors().iter().zip(&s.blocks) {
        let mut lambda = block.eigenvalues();
        let min = lambda.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -BLOCK_NEGATIVITY_TOL {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        lambda.iter_mut().for_each(|l| *l = l.max(0.0));
        let p: f64 = lambda.iter().sum();
        total += shannon_entropy(&lambda) + p * lf.ln_dicke_dimension(n, sector.two_j);
    }
    Ok(total)
}

/// `⟨m_α⟩ = (2/N) Σ_J Tr(ρ_J Ĵ_α)`.
pub fn local_magnetization(s: &DickeState) -> [f64; 3] {
    let mut m = [0.0; 3];
    for (sector, block) in s.layout.sectors().iter().zip(&s.blocks) {
        let j = sector.j();
        for a in 0..sector.size() {
            let ma = sector.m(a);
            m[2] += ma * block.entry(a, a).re;
            if a + 1 < sector.size() {
                let c = raising(j, ma);
                let rho = block.entry(a, a + 1);
                m[0] += c * rho.re;
                m[1] += c * rho.im;
            }
        }
    }
    let scale = 2.0 / s.n() as f64;
    m.map(|v| v * scale)
}

/// Entropy of the single-unit marginal built from [`local_magnetization`].
pub fn local_entropy(s: &DickeState) -> Result<f64> {
    let m = local_magnetization(s);
    let r = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
    binary_entropy(r.min(1.0))
}
