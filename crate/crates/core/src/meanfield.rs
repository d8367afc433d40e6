//! Mean-field drift dynamics: integration, attractor classification, time
//! averages over the attractor and the large-N mutual information.

use crate::error::{Error, Result};
use crate::linalg::{nonsymmetric_eigenvalues, Lu, RMatrix};
use crate::ode::{self, Control, DenseStep, Tolerances};
use crate::quadrature::gauss_legendre_on;
use crate::state_space::{binary_entropy, density_from_bloch, BlochVector, UnitDensity};

/// Bloch-body excursions beyond this abort integration.
pub const BLOCH_ESCAPE_TOL: f64 = 1e-6;

/// Vector field `g(ξ)` on the Bloch body of a `d`-level unit.
pub trait DriftSystem: Sync {
    fn levels(&self) -> usize;

    fn dim(&self) -> usize {
        let d = self.levels();
        d * d - 1
    }

    fn field(&self, xi: &[f64], out: &mut [f64]);

    fn jacobian(&self, xi: &[f64]) -> RMatrix;

    /// How far `xi` lies outside the Bloch body (zero inside).
    fn body_excess(&self, xi: &[f64]) -> f64 {
        body_excess(self.levels(), xi)
    }
}

/// Distance outside the Bloch ball for qubits; `-d λ_min` of the induced
/// density matrix otherwise.
pub fn body_excess(d: usize, xi: &[f64]) -> f64 {
    if d == 2 {
        let r = xi.iter().map(|c| c * c).sum::<f64>().sqrt();
        return (r - 1.0).max(0.0);
    }
    let bv = match BlochVector::new(d, xi.to_vec()) {
        Ok(bv) => bv,
        Err(_) => return f64::INFINITY,
    };
    match density_from_bloch(&bv) {
        Ok(rho) => {
            let min = crate::linalg::hermitian_eigenvalues(rho.matrix())
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            (-(d as f64) * min).max(0.0)
        }
        Err(Error::BlochOutOfBody { min_eigenvalue }) => -(d as f64) * min_eigenvalue,
        Err(_) => f64::INFINITY,
    }
}

/// `g(ξ) = A ξ`. Handy for tests and as a linearization.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearDrift {
    levels: usize,
    a: RMatrix,
}

impl LinearDrift {
    pub fn new(levels: usize, a: RMatrix) -> Result<Self> {
        let dim = levels * levels - 1;
        if a.rows() != dim || a.cols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: a.rows(),
            });
        }
        Ok(Self { levels, a })
    }

    pub fn zero(levels: usize) -> Self {
        let dim = levels * levels - 1;
        Self {
            levels,
            a: RMatrix::zeros(dim, dim),
        }
    }
}

impl DriftSystem for LinearDrift {
    fn levels(&self) -> usize {
        self.levels
    }

    fn field(&self, xi: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.a.matvec(xi));
    }

    fn jacobian(&self, _xi: &[f64]) -> RMatrix {
        self.a.clone()
    }
}

/// Stored piece of a solution with dense output on `[t_start, t_end]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    levels: usize,
    steps: Vec<DenseStep>,
}

impl Trajectory {
    fn new(levels: usize, steps: Vec<DenseStep>) -> Self {
        assert!(!steps.is_empty(), "trajectory needs at least one step");
        Self { levels, steps }
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn t_start(&self) -> f64 {
        self.steps[0].t
    }

    pub fn t_end(&self) -> f64 {
        self.steps.last().map(DenseStep::t_end).unwrap_or(0.0)
    }

    pub fn steps(&self) -> &[DenseStep] {
        &self.steps
    }

    /// Mesh times, strictly increasing.
    pub fn times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.steps.iter().map(|s| s.t).collect();
        t.push(self.t_end());
        t
    }

    /// States at the mesh times.
    pub fn states(&self) -> Vec<Vec<f64>> {
        let mut s: Vec<Vec<f64>> = self.steps.iter().map(|s| s.start().to_vec()).collect();
        s.push(self.final_state());
        s
    }

    pub fn initial_state(&self) -> Vec<f64> {
        self.steps[0].start().to_vec()
    }

    pub fn final_state(&self) -> Vec<f64> {
        self.steps.last().expect("nonempty").end()
    }

    /// Dense-output state at `t`, clamped to the stored interval.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.steps[0].start().len()];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let idx = self
            .steps
            .partition_point(|s| s.t_end() < t)
            .min(self.steps.len() - 1);
        let step = &self.steps[idx];
        step.eval(t.clamp(step.t, step.t_end()), out);
    }
}

fn check_start<S: DriftSystem + ?Sized>(sys: &S, xi0: &[f64]) -> Result<()> {
    if xi0.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: xi0.len(),
        });
    }
    let excess = sys.body_excess(xi0);
    if excess > BLOCH_ESCAPE_TOL {
        return Err(Error::BlochOutOfBody {
            min_eigenvalue: -excess,
        });
    }
    Ok(())
}

/// Integrates from `(t0, y0)` to `t_end`, keeping the steps that end after
/// `keep_from`. Returns the final state and the kept steps.
fn run<S: DriftSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    tol: &Tolerances,
    keep_from: f64,
    mut on_step: impl FnMut(&DenseStep),
) -> Result<(Vec<f64>, Vec<DenseStep>)> {
    let mut kept = Vec::new();
    let (_, y) = ode::integrate(
        |_, y, out| sys.field(y, out),
        t0,
        y0,
        t_end,
        tol,
        |step| {
            let end = step.end();
            let excess = sys.body_excess(&end);
            if excess > BLOCH_ESCAPE_TOL {
                return Err(Error::BlochEscape {
                    t: step.t_end(),
                    excess,
                });
            }
            on_step(step);
            if step.t_end() > keep_from {
                kept.push(step.clone());
            }
            Ok(Control::Continue)
        },
    )?;
    Ok((y, kept))
}

/// Solves `dξ/dt = g(ξ)` on `[0, t_end]` with dense output.
pub fn integrate<S: DriftSystem + ?Sized>(
    sys: &S,
    xi0: &BlochVector,
    t_end: f64,
    tol: &Tolerances,
) -> Result<Trajectory> {
    check_start(sys, xi0.coords())?;
    if !(t_end > 0.0) {
        return Err(Error::InvalidParams(format!("t_end must be positive, got {t_end}")));
    }
    let (_, steps) = run(sys, 0.0, xi0.coords(), t_end, tol, f64::NEG_INFINITY, |_| {})?;
    Ok(Trajectory::new(sys.levels(), steps))
}

/// Settings for attractor search and averaging.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanFieldSettings {
    pub tolerances: Tolerances,
    /// Lower bound on the discarded transient.
    pub min_transient: f64,
    /// Overrides the Jacobian-based transient estimate when set.
    pub transient_override: Option<f64>,
    /// Integration stops extending beyond this total time.
    pub max_time: f64,
    /// `|g| <` this at the Newton-polished point marks a fixed point.
    pub fixed_point_tol: f64,
    /// Largest tail excursion from the end state for a fixed point.
    pub still_tol: f64,
    /// Poincaré return mismatch for a limit cycle.
    pub return_tol: f64,
    /// Relative tolerance for the spread of successive return times.
    pub period_tol: f64,
    /// Tail return mismatch that still makes a cycle worth polishing.
    pub candidate_tol: f64,
    /// Tolerances used to polish and re-integrate a detected cycle.
    pub cycle_tolerances: Tolerances,
    /// Starting Gauss–Legendre node count over one period.
    pub quadrature_nodes: usize,
    /// Node doubling stops once the mean entropy moves less than this.
    pub quadrature_tol: f64,
    /// Window-average agreement required for unclassified attractors.
    pub average_tol: f64,
    /// Total averaging time allowed for unclassified attractors.
    pub max_average_time: f64,
}

impl Default for MeanFieldSettings {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            min_transient: 100.0,
            transient_override: None,
            max_time: 2e4,
            fixed_point_tol: 1e-9,
            still_tol: 1e-6,
            return_tol: 1e-7,
            period_tol: 1e-6,
            candidate_tol: 1e-3,
            cycle_tolerances: Tolerances::new(1e-12, 1e-14),
            quadrature_nodes: 64,
            quadrature_tol: 1e-10,
            average_tol: 1e-7,
            max_average_time: 2e5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AttractorKind {
    FixedPoint {
        point: Vec<f64>,
    },
    /// `cycle` starts on the cycle at the section point and covers at least
    /// one period.
    LimitCycle {
        period: f64,
        cycle: Trajectory,
        return_mismatch: f64,
    },
    /// Long-window statistics for attractors that are neither of the above.
    Unclassified {
        mean: Vec<f64>,
        mean_entropy: f64,
        window: f64,
        achieved: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttractorReport {
    pub levels: usize,
    pub kind: AttractorKind,
    /// Time discarded before the classification window.
    pub transient_time: f64,
}

impl AttractorReport {
    pub fn label(&self) -> &'static str {
        match self.kind {
            AttractorKind::FixedPoint { .. } => "fixed_point",
            AttractorKind::LimitCycle { .. } => "limit_cycle",
            AttractorKind::Unclassified { .. } => "unclassified",
        }
    }

    pub fn period(&self) -> Option<f64> {
        match self.kind {
            AttractorKind::LimitCycle { period, .. } => Some(period),
            _ => None,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Classifies the attractor seen in the last quarter of `traj`.
pub fn classify_attractor<S: DriftSystem + ?Sized>(
    sys: &S,
    traj: &Trajectory,
) -> Result<AttractorReport> {
    classify_attractor_with(sys, traj, &MeanFieldSettings::default())
}

pub fn classify_attractor_with<S: DriftSystem + ?Sized>(
    sys: &S,
    traj: &Trajectory,
    settings: &MeanFieldSettings,
) -> Result<AttractorReport> {
    let t_tail = traj.t_end() - 0.25 * (traj.t_end() - traj.t_start());
    classify_window(sys, traj, t_tail, settings)
}

/// Tail samples: every mesh point and step midpoint at or after `t_tail`.
fn tail_samples(traj: &Trajectory, t_tail: f64) -> Vec<Vec<f64>> {
    let mut out = vec![traj.eval(t_tail)];
    let mut buf = vec![0.0; traj.final_state().len()];
    for s in traj.steps().iter().filter(|s| s.t_end() > t_tail) {
        let mid = s.t + 0.5 * s.h;
        if mid > t_tail {
            s.eval(mid, &mut buf);
            out.push(buf.clone());
        }
        out.push(s.end());
    }
    out
}

fn classify_window<S: DriftSystem + ?Sized>(
    sys: &S,
    traj: &Trajectory,
    t_tail: f64,
    settings: &MeanFieldSettings,
) -> Result<AttractorReport> {
    let n = sys.dim();
    let end = traj.final_state();
    let mut g = vec![0.0; n];
    sys.field(&end, &mut g);
    let speed_end = norm(&g);
    let samples = tail_samples(traj, t_tail);
    let displacement = samples
        .iter()
        .map(|s| distance(s, &end))
        .fold(0.0, f64::max);
    if displacement < settings.still_tol {
        let point = if speed_end < 1e-14 {
            Some(end.clone())
        } else {
            newton_polish(sys, &end).filter(|p| is_stable(sys, p))
        };
        if let Some(point) = point {
            sys.field(&point, &mut g);
            if norm(&g) < settings.fixed_point_tol && distance(&point, &end) < settings.still_tol {
                return Ok(AttractorReport {
                    levels: sys.levels(),
                    kind: AttractorKind::FixedPoint { point },
                    transient_time: t_tail,
                });
            }
        }
    }
    if displacement < 1e-4 {
        // still creeping towards something stationary
        return Err(Error::TransientNotConverged {
            elapsed: traj.t_end(),
        });
    }

    let anchor = traj.eval(t_tail);
    let mut normal = vec![0.0; n];
    sys.field(&anchor, &mut normal);
    let speed = norm(&normal);
    if speed == 0.0 {
        return Err(Error::TransientNotConverged {
            elapsed: traj.t_end(),
        });
    }
    normal.iter_mut().for_each(|c| *c /= speed);
    let crossings = section_crossings(traj, t_tail, &anchor, &normal);

    // crossings[i - 1] is the i-th upward crossing after the anchor
    let mut best = f64::INFINITY;
    let count = crossings.len();
    for k in 1..=count / 3 {
        let mismatch = [k, 2 * k, 3 * k]
            .iter()
            .map(|&i| distance(&crossings[i - 1].1, &anchor))
            .fold(0.0, f64::max);
        best = best.min(mismatch);
        let periods = [
            crossings[k - 1].0 - t_tail,
            crossings[2 * k - 1].0 - crossings[k - 1].0,
            crossings[3 * k - 1].0 - crossings[2 * k - 1].0,
        ];
        let mean = periods.iter().sum::<f64>() / 3.0;
        let spread = periods
            .iter()
            .map(|p| (p - mean).abs())
            .fold(0.0, f64::max);
        let strict = mismatch < settings.return_tol && spread <= settings.period_tol * mean;
        let loose = mismatch < settings.candidate_tol && spread <= settings.candidate_tol * mean;
        if !(strict || loose) {
            continue;
        }
        // shortest stable periodic orbit through the section near the anchor
        for j in 1..=k {
            let guess = crossings[j - 1].0 - t_tail;
            if let Some(report) = shoot_cycle(sys, &anchor, &normal, guess, t_tail, settings)? {
                return Ok(report);
            }
        }
        // longer multiples repeat the same guesses; a slow spiral passes the
        // loose test at every k
        break;
    }
    if best < 1e-3 || count < 4 {
        return Err(Error::TransientNotConverged {
            elapsed: traj.t_end(),
        });
    }
    Ok(AttractorReport {
        levels: sys.levels(),
        kind: AttractorKind::Unclassified {
            mean: Vec::new(),
            mean_entropy: f64::NAN,
            window: 0.0,
            achieved: f64::INFINITY,
        },
        transient_time: t_tail,
    })
}

/// Newton iteration on `g(ξ) = 0`; the integrator alone stalls at the
/// absolute-tolerance noise floor.
fn newton_polish<S: DriftSystem + ?Sized>(sys: &S, start: &[f64]) -> Option<Vec<f64>> {
    let mut x = start.to_vec();
    let mut g = vec![0.0; x.len()];
    for _ in 0..20 {
        sys.field(&x, &mut g);
        if norm(&g) < 1e-14 {
            return Some(x);
        }
        let lu = Lu::factor(&sys.jacobian(&x));
        if lu.perturbed_pivots > 0 {
            return None;
        }
        let dx = lu.solve(&g);
        x.iter_mut().zip(&dx).for_each(|(a, d)| *a -= d);
        if norm(&dx) < 1e-15 * (1.0 + norm(&x)) {
            return Some(x);
        }
    }
    sys.field(&x, &mut g);
    (norm(&g) < 1e-12).then_some(x)
}

fn is_stable<S: DriftSystem + ?Sized>(sys: &S, xi: &[f64]) -> bool {
    nonsymmetric_eigenvalues(&sys.jacobian(xi))
        .iter()
        .all(|l| l.re < 0.0)
}

/// Upward crossings of the hyperplane `normal · (ξ - anchor) = 0` strictly
/// after `t_from`, refined on the dense output.
fn section_crossings(
    traj: &Trajectory,
    t_from: f64,
    anchor: &[f64],
    normal: &[f64],
) -> Vec<(f64, Vec<f64>)> {
    const SUB: usize = 4;
    let mut buf = vec![0.0; anchor.len()];
    let side = |step: &DenseStep, t: f64, buf: &mut [f64]| {
        step.eval(t, buf);
        buf.iter()
            .zip(anchor)
            .zip(normal)
            .map(|((x, a), n)| (x - a) * n)
            .sum::<f64>()
    };
    let mut out = Vec::new();
    // the anchor itself is an upward crossing; skip past it
    let mut prev: Option<(f64, f64)> = None;
    for step in traj.steps().iter().filter(|s| s.t_end() > t_from) {
        let lo = step.t.max(t_from);
        for k in 0..=SUB {
            let t = lo + (step.t_end() - lo) * k as f64 / SUB as f64;
            let s = side(step, t, &mut buf);
            if let Some((tp, sp)) = prev {
                if sp < 0.0 && s >= 0.0 && t > tp {
                    let tc = refine_root(|t| side(step_for(traj, t), t, &mut buf.clone()), tp, t, sp, s);
                    out.push((tc, traj.eval(tc)));
                }
            }
            prev = Some((t, if t == t_from { 1.0 } else { s }));
        }
    }
    out
}

fn step_for(traj: &Trajectory, t: f64) -> &DenseStep {
    let idx = traj
        .steps()
        .partition_point(|s| s.t_end() < t)
        .min(traj.steps().len() - 1);
    &traj.steps()[idx]
}

/// Illinois false position on a bracketing interval.
fn refine_root(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> f64 {
    if fb == 0.0 {
        return b;
    }
    let mut side = 0i32;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c);
        if fc == 0.0 || (b - a).abs() < 1e-14 * (1.0 + c.abs()) {
            return c;
        }
        if (fc > 0.0) == (fb > 0.0) {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (a + b)
}

/// Flow map `φ_T(x)` and fundamental matrix `∂φ_T/∂x`, integrated together.
pub fn flow_with_variational<S: DriftSystem + ?Sized>(
    sys: &S,
    x: &[f64],
    period: f64,
    tol: &Tolerances,
) -> Result<(Vec<f64>, RMatrix)> {
    let n = x.len();
    let mut y0 = x.to_vec();
    y0.extend(RMatrix::identity(n).as_slice());
    let mut g = vec![0.0; n];
    let (_, y) = ode::integrate(
        |_, y, out| {
            let (xi, m) = y.split_at(n);
            sys.field(xi, &mut g);
            out[..n].copy_from_slice(&g);
            let jac = sys.jacobian(xi);
            for r in 0..n {
                for c in 0..n {
                    out[n + r * n + c] = (0..n).map(|k| jac[(r, k)] * m[k * n + c]).sum();
                }
            }
        },
        0.0,
        &y0,
        period,
        tol,
        |_| Ok(Control::Continue),
    )?;
    let (xi, m) = y.split_at(n);
    Ok((xi.to_vec(), RMatrix::from_row_major(n, n, m.to_vec())))
}

/// Newton shooting for a periodic orbit through the section
/// `normal · (x - anchor) = 0`, started at the anchor with period `guess`.
/// Returns `None` unless it converges to an attracting orbit of nonzero
/// amplitude whose return mismatch is below `return_tol`.
fn shoot_cycle<S: DriftSystem + ?Sized>(
    sys: &S,
    anchor: &[f64],
    normal: &[f64],
    guess: f64,
    transient: f64,
    settings: &MeanFieldSettings,
) -> Result<Option<AttractorReport>> {
    let n = anchor.len();
    let tol = &settings.cycle_tolerances;
    let mut x = anchor.to_vec();
    let mut period = guess;
    let mut g = vec![0.0; n];
    let mut converged = false;
    for _ in 0..25 {
        if !(period > 0.0) || period > 4.0 * guess {
            return Ok(None);
        }
        let (end, m) = match flow_with_variational(sys, &x, period, tol) {
            Ok(v) => v,
            Err(Error::StepSizeUnderflow { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let residual: Vec<f64> = end.iter().zip(&x).map(|(a, b)| a - b).collect();
        if norm(&residual) < 1e-12 {
            converged = true;
            break;
        }
        sys.field(&end, &mut g);
        // [[M - I, g(φ_T x)], [normalᵀ, 0]] (dx, dT) = (-residual, -phase)
        let mut a = RMatrix::zeros(n + 1, n + 1);
        for r in 0..n {
            for c in 0..n {
                a[(r, c)] = m[(r, c)] - if r == c { 1.0 } else { 0.0 };
            }
            a[(r, n)] = g[r];
            a[(n, r)] = normal[r];
        }
        let phase: f64 = x.iter().zip(anchor).zip(normal).map(|((a, b), c)| (a - b) * c).sum();
        let mut rhs: Vec<f64> = residual.iter().map(|v| -v).collect();
        rhs.push(-phase);
        let lu = Lu::factor(&a);
        if lu.perturbed_pivots > 0 {
            return Ok(None);
        }
        let delta = lu.solve(&rhs);
        for (xi, d) in x.iter_mut().zip(&delta) {
            *xi += d;
        }
        period += delta[n];
        if norm(&delta) < 1e-14 * (1.0 + period) {
            converged = true;
            break;
        }
    }
    if !converged || distance(&x, anchor) > settings.candidate_tol.max(settings.return_tol) {
        return Ok(None);
    }
    sys.field(&x, &mut g);
    if norm(&g) < 1e-6 {
        return Ok(None);
    }
    let (end, m) = flow_with_variational(sys, &x, period, tol)?;
    let return_mismatch = distance(&end, &x);
    if return_mismatch >= settings.return_tol || !is_attracting_cycle(&m) {
        return Ok(None);
    }
    // dense one-period record, slightly past the period for interpolation
    let (_, steps) = run(sys, 0.0, &x, period * 1.01, tol, f64::NEG_INFINITY, |_| {})?;
    Ok(Some(AttractorReport {
        levels: sys.levels(),
        kind: AttractorKind::LimitCycle {
            period,
            cycle: Trajectory::new(sys.levels(), steps),
            return_mismatch,
        },
        transient_time: transient,
    }))
}

/// All multipliers except the one closest to 1 lie inside the unit circle.
fn is_attracting_cycle(monodromy: &RMatrix) -> bool {
    let mut mu = nonsymmetric_eigenvalues(monodromy);
    mu.sort_by(|a, b| (a - 1.0).norm().total_cmp(&(b - 1.0).norm()));
    mu.iter().skip(1).all(|m| m.norm() < 1.0)
}

/// Slowest nonzero relaxation rate of the linearization at `xi`.
fn slowest_rate<S: DriftSystem + ?Sized>(sys: &S, xi: &[f64]) -> f64 {
    let eig = nonsymmetric_eigenvalues(&sys.jacobian(xi));
    eig.iter()
        .map(|l| l.re.abs())
        .filter(|&r| r > 1e-6)
        .fold(f64::INFINITY, f64::min)
}

/// Non-hyperbolic fixed point that the tail of `traj` approaches
/// monotonically, as at a bifurcation where the decay is only algebraic.
/// Neutral centers are excluded by requiring the distance to keep shrinking.
fn marginal_fixed_point<S: DriftSystem + ?Sized>(
    sys: &S,
    traj: &Trajectory,
    settings: &MeanFieldSettings,
) -> Option<Vec<f64>> {
    const PARTS: usize = 3;
    let point = newton_polish(sys, &traj.final_state())?;
    let mut g = vec![0.0; point.len()];
    sys.field(&point, &mut g);
    if norm(&g) >= settings.fixed_point_tol {
        return None;
    }
    let jac = sys.jacobian(&point);
    let scale = jac.as_slice().iter().fold(0.0_f64, |a, b| a.max(b.abs())).max(1.0);
    let abscissa = nonsymmetric_eigenvalues(&jac)
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if abscissa > 1e-9 * scale {
        return None;
    }
    // largest distance over successive thirds of the window
    let (t0, t1) = (traj.t_start(), traj.t_end());
    let mut reach = [0.0_f64; PARTS];
    for s in traj.steps() {
        let k = (((s.t_end() - t0) / (t1 - t0) * PARTS as f64) as usize).min(PARTS - 1);
        reach[k] = reach[k].max(distance(&s.end(), &point));
    }
    let shrinking = reach.windows(2).all(|w| w[1] < w[0]);
    (shrinking && reach[PARTS - 1] < settings.candidate_tol.sqrt()).then_some(point)
}

/// Integrates from `xi0`, discards the transient and classifies the
/// attractor, doubling the horizon while the tail is still drifting.
/// Attractors that stay unresolved up to `max_time` are averaged over
/// doubling windows.
pub fn find_attractor<S: DriftSystem + ?Sized>(
    sys: &S,
    xi0: &BlochVector,
    settings: &MeanFieldSettings,
) -> Result<AttractorReport> {
    check_start(sys, xi0.coords())?;
    let tol = &settings.tolerances;
    let probe = settings.min_transient.min(settings.max_time);
    let (mut y, _) = run(sys, 0.0, xi0.coords(), probe, tol, f64::INFINITY, |_| {})?;
    let mut t = probe;
    let transient = match settings.transient_override {
        Some(v) => v,
        None => (50.0 / slowest_rate(sys, &y)).max(settings.min_transient),
    };
    // total horizon; the last quarter is the classification window
    let mut horizon = (transient / 0.75).min(settings.max_time).max(t);
    loop {
        let t_tail = 0.75 * horizon;
        let (skip_y, _) = run(sys, t, &y, t_tail.max(t), tol, f64::INFINITY, |_| {})?;
        let (end_y, steps) = run(sys, t_tail.max(t), &skip_y, horizon, tol, f64::NEG_INFINITY, |_| {})?;
        let traj = Trajectory::new(sys.levels(), steps);
        let outcome = classify_window(sys, &traj, traj.t_start(), settings);
        y = end_y;
        t = horizon;
        match outcome {
            Ok(report) if !matches!(report.kind, AttractorKind::Unclassified { .. }) => {
                return Ok(report)
            }
            Ok(_) | Err(Error::TransientNotConverged { .. }) => {
                if horizon >= settings.max_time {
                    if let Some(point) = marginal_fixed_point(sys, &traj, settings) {
                        return Ok(AttractorReport {
                            levels: sys.levels(),
                            kind: AttractorKind::FixedPoint { point },
                            transient_time: t,
                        });
                    }
                    return window_average(sys, &y, t, settings);
                }
                horizon = (2.0 * horizon).min(settings.max_time);
            }
            Err(e) => return Err(e),
        }
    }
}

/// Composite Gauss–Legendre accumulation of `∫ξ dt` and `∫S dt` per step.
struct Accumulator {
    levels: usize,
    sum: Vec<f64>,
    entropy: f64,
    time: f64,
    error: Option<Error>,
    nodes: (Vec<f64>, Vec<f64>),
}

impl Accumulator {
    fn new(levels: usize, dim: usize) -> Self {
        Self {
            levels,
            sum: vec![0.0; dim],
            entropy: 0.0,
            time: 0.0,
            error: None,
            nodes: crate::quadrature::gauss_legendre(5),
        }
    }

    fn add(&mut self, step: &DenseStep) {
        let mut buf = vec![0.0; self.sum.len()];
        for (x, w) in self.nodes.0.iter().zip(&self.nodes.1) {
            let t = step.t + 0.5 * step.h * (1.0 + x);
            step.eval(t, &mut buf);
            let wt = 0.5 * step.h * w;
            for (s, b) in self.sum.iter_mut().zip(&buf) {
                *s += wt * b;
            }
            match bloch_entropy(self.levels, &buf) {
                Ok(s) => self.entropy += wt * s,
                Err(e) => {
                    self.error.get_or_insert(e);
                }
            }
        }
        self.time += step.h;
    }

    fn means(&self) -> (Vec<f64>, f64) {
        (
            self.sum.iter().map(|s| s / self.time).collect(),
            self.entropy / self.time,
        )
    }
}

fn window_average<S: DriftSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    t0: f64,
    settings: &MeanFieldSettings,
) -> Result<AttractorReport> {
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut window = (0.25 * t0).max(settings.min_transient);
    let mut spent = 0.0;
    let mut prev: Option<(Vec<f64>, f64)> = None;
    let mut achieved = f64::INFINITY;
    loop {
        let mut acc = Accumulator::new(sys.levels(), sys.dim());
        let (end, _) = run(sys, t, &y, t + window, &settings.tolerances, f64::INFINITY, |s| acc.add(s))?;
        if let Some(e) = acc.error.take() {
            return Err(e);
        }
        let (mean, mean_entropy) = acc.means();
        if let Some((pm, ps)) = &prev {
            achieved = mean
                .iter()
                .zip(pm)
                .map(|(a, b)| (a - b).abs())
                .fold((mean_entropy - ps).abs(), f64::max);
        }
        y = end;
        t += window;
        spent += window;
        if achieved < settings.average_tol || spent + 2.0 * window > settings.max_average_time {
            return Ok(AttractorReport {
                levels: sys.levels(),
                kind: AttractorKind::Unclassified {
                    mean,
                    mean_entropy,
                    window,
                    achieved,
                },
                transient_time: t0,
            });
        }
        prev = Some((mean, mean_entropy));
        window *= 2.0;
    }
}

/// Entropy of `ρ(ξ)` with small integration overshoots of the body clamped.
pub fn bloch_entropy(levels: usize, xi: &[f64]) -> Result<f64> {
    if levels == 2 {
        let r = norm(xi);
        if r > 1.0 + BLOCH_ESCAPE_TOL {
            return Err(Error::BlochOutOfBody {
                min_eigenvalue: 0.5 * (1.0 - r),
            });
        }
        return binary_entropy(r.min(1.0));
    }
    let rho = density_from_bloch(&BlochVector::new(levels, xi.to_vec())?)?;
    crate::state_space::von_neumann_entropy(&rho)
}

/// Period averages of `ξ` and `S(ρ(ξ))` by Gauss–Legendre on the dense
/// output, doubling the node count until the entropy average settles.
fn cycle_averages(
    cycle: &Trajectory,
    period: f64,
    settings: &MeanFieldSettings,
) -> Result<(Vec<f64>, f64)> {
    let levels = cycle.levels();
    let t0 = cycle.t_start();
    let dim = cycle.final_state().len();
    let average = |n: usize| -> Result<(Vec<f64>, f64)> {
        let (ts, ws) = gauss_legendre_on(n, t0, t0 + period);
        let mut mean = vec![0.0; dim];
        let mut entropy = 0.0;
        let mut buf = vec![0.0; dim];
        for (t, w) in ts.iter().zip(&ws) {
            cycle.eval_into(*t, &mut buf);
            for (m, b) in mean.iter_mut().zip(&buf) {
                *m += w * b;
            }
            entropy += w * bloch_entropy(levels, &buf)?;
        }
        mean.iter_mut().for_each(|m| *m /= period);
        Ok((mean, entropy / period))
    };
    let mut n = settings.quadrature_nodes.max(64);
    let mut current = average(n)?;
    loop {
        n *= 2;
        let next = average(n)?;
        let change = (next.1 - current.1).abs();
        current = next;
        if change < settings.quadrature_tol || n >= 1 << 14 {
            return Ok(current);
        }
    }
}

/// Time average of the unit state over the attractor.
pub fn time_average_state(report: &AttractorReport) -> Result<UnitDensity> {
    time_average_state_with(report, &MeanFieldSettings::default())
}

pub fn time_average_state_with(
    report: &AttractorReport,
    settings: &MeanFieldSettings,
) -> Result<UnitDensity> {
    let (mean, _) = averages(report, settings)?;
    density_from_bloch(&BlochVector::new(report.levels, mean)?)
}

/// `(ξ̄, mean entropy)` over the attractor.
fn averages(report: &AttractorReport, settings: &MeanFieldSettings) -> Result<(Vec<f64>, f64)> {
    match &report.kind {
        AttractorKind::FixedPoint { point } => {
            Ok((point.clone(), bloch_entropy(report.levels, point)?))
        }
        AttractorKind::LimitCycle { period, cycle, .. } => cycle_averages(cycle, *period, settings),
        AttractorKind::Unclassified {
            mean,
            mean_entropy,
            achieved,
            ..
        } => {
            if !(*achieved < settings.average_tol) {
                return Err(Error::AverageNotConverged {
                    achieved: *achieved,
                });
            }
            Ok((mean.clone(), *mean_entropy))
        }
    }
}

/// Everything computed on the way to the large-N mutual information.
#[derive(Clone, Debug, PartialEq)]
pub struct MacroscopicResult {
    /// `S(ρ̄) - mean S(ρ)`, clamped at zero.
    pub mutual_info: f64,
    /// Entropy of the time-averaged unit state.
    pub entropy_of_mean: f64,
    /// Time average of the unit entropy.
    pub mean_entropy: f64,
    /// Time-averaged Bloch vector.
    pub mean_bloch: Vec<f64>,
    pub report: AttractorReport,
}

/// Large-N intensive mutual information of the attractor reached from `xi0`.
pub fn macroscopic_mutual_info<S: DriftSystem + ?Sized>(
    sys: &S,
    xi0: &BlochVector,
    settings: &MeanFieldSettings,
) -> Result<f64> {
    Ok(macroscopic_analysis(sys, xi0, settings)?.mutual_info)
}

pub fn macroscopic_analysis<S: DriftSystem + ?Sized>(
    sys: &S,
    xi0: &BlochVector,
    settings: &MeanFieldSettings,
) -> Result<MacroscopicResult> {
    let report = find_attractor(sys, xi0, settings)?;
    mutual_info_of(report, settings)
}

/// Mutual information from an already classified attractor.
pub fn mutual_info_of(report: AttractorReport, settings: &MeanFieldSettings) -> Result<MacroscopicResult> {
    let (mean, mean_entropy) = averages(&report, settings)?;
    let entropy_of_mean = bloch_entropy(report.levels, &mean)?;
    let raw = match report.kind {
        AttractorKind::FixedPoint { .. } => 0.0,
        _ => entropy_of_mean - mean_entropy,
    };
    Ok(MacroscopicResult {
        mutual_info: raw.max(0.0),
        entropy_of_mean,
        mean_entropy,
        mean_bloch: mean,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmg::{analytic_limit_cycle, analytic_mutual_info, LmgParams};
    use approx::assert_abs_diff_eq;

    fn lmg(h: f64, g: f64) -> LmgParams {
        LmgParams::new(3.0, h, g, 1.0).unwrap()
    }

    fn start() -> BlochVector {
        BlochVector::qubit(0.3, 0.0, 0.8)
    }

    #[test]
    fn zero_drift_trajectory_is_constant() {
        let sys = LinearDrift::zero(2);
        let traj = integrate(&sys, &start(), 10.0, &Tolerances::default()).unwrap();
        assert!(traj.states().iter().all(|s| s == &vec![0.3, 0.0, 0.8]));
        assert_eq!(traj.eval(3.3), vec![0.3, 0.0, 0.8]);
        let report = classify_attractor(&sys, &traj).unwrap();
        assert_eq!(report.kind, AttractorKind::FixedPoint { point: vec![0.3, 0.0, 0.8] });
    }

    #[test]
    fn north_pole_stays_put() {
        let traj = integrate(&lmg(0.0, 2.0), &BlochVector::qubit(0.0, 0.0, 1.0), 50.0, &Tolerances::default()).unwrap();
        assert_eq!(traj.final_state(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn relaxes_onto_analytic_cycle_height() {
        let traj = integrate(&lmg(0.0, 2.0), &start(), 200.0, &Tolerances::default()).unwrap();
        let z = traj.final_state()[2];
        assert!((z - 0.5).abs() < 1e-6, "m_z = {z}");
        let times = traj.times();
        assert!(times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rejects_start_outside_ball() {
        let err = integrate(&lmg(0.0, 2.0), &BlochVector::qubit(0.9, 0.9, 0.0), 1.0, &Tolerances::default());
        assert!(matches!(err, Err(Error::BlochOutOfBody { .. })));
    }

    #[test]
    fn escape_is_detected() {
        // pure expansion leaves the ball
        let sys = LinearDrift::new(2, RMatrix::identity(3)).unwrap();
        let err = integrate(&sys, &start(), 5.0, &Tolerances::default());
        assert!(matches!(err, Err(Error::BlochEscape { .. })));
    }

    #[test]
    fn fixed_point_phase() {
        let report = find_attractor(&lmg(0.0, 0.5), &start(), &MeanFieldSettings::default()).unwrap();
        match &report.kind {
            AttractorKind::FixedPoint { point } => {
                assert!(distance(point, &[0.0, 0.0, 1.0]) < 1e-8);
            }
            other => panic!("expected fixed point, got {other:?}"),
        }
        let rho = time_average_state(&report).unwrap();
        assert!((rho.matrix()[(0, 0)].re - 1.0).abs() < 1e-8);
        let mi = macroscopic_mutual_info(&lmg(0.0, 0.5), &start(), &MeanFieldSettings::default()).unwrap();
        assert!(mi < 1e-9);
    }

    #[test]
    fn bifurcation_point_creeps_into_the_pole() {
        // at Γ = γ the pole is non-hyperbolic and the approach is algebraic
        let report = find_attractor(&lmg(0.0, 1.0), &start(), &MeanFieldSettings::default()).unwrap();
        match &report.kind {
            AttractorKind::FixedPoint { point } => assert!(distance(point, &[0.0, 0.0, 1.0]) < 1e-8),
            other => panic!("expected fixed point, got {other:?}"),
        }
        let mi = macroscopic_mutual_info(&lmg(0.0, 1.0), &start(), &MeanFieldSettings::default()).unwrap();
        assert!(mi < 1e-9);
    }

    #[test]
    fn neutral_center_is_not_a_fixed_point() {
        // rotation about z with decaying z: circles of every radius persist
        let a = RMatrix::from_fn(3, 3, |i, j| match (i, j) {
            (0, 1) => 1.0,
            (1, 0) => -1.0,
            (2, 2) => -1.0,
            _ => 0.0,
        });
        let sys = LinearDrift::new(2, a).unwrap();
        let settings = MeanFieldSettings {
            max_time: 400.0,
            max_average_time: 400.0,
            ..MeanFieldSettings::default()
        };
        if let Ok(report) = find_attractor(&sys, &start(), &settings) {
            assert!(!matches!(report.kind, AttractorKind::FixedPoint { .. }));
        }
    }

    #[test]
    fn fixed_point_average_is_exact() {
        let point = vec![0.1, 0.2, 0.3];
        let report = AttractorReport {
            levels: 2,
            kind: AttractorKind::FixedPoint { point: point.clone() },
            transient_time: 0.0,
        };
        let direct = density_from_bloch(&BlochVector::qubit(0.1, 0.2, 0.3)).unwrap();
        assert_eq!(time_average_state(&report).unwrap(), direct);
    }

    #[test]
    fn detects_analytic_cycle() {
        let p = lmg(0.0, 2.0);
        let report = find_attractor(&p, &start(), &MeanFieldSettings::default()).unwrap();
        let exact = analytic_limit_cycle(&p).unwrap().period();
        let period = report.period().expect("limit cycle");
        assert!(((period - exact) / exact).abs() < 1e-6, "{period} vs {exact}");
        let rho = time_average_state(&report).unwrap();
        let xi = rho.bloch_vector();
        assert_abs_diff_eq!(xi.coords()[0], 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(xi.coords()[1], 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(xi.coords()[2], 0.5, epsilon = 1e-7);
    }

    #[test]
    fn mean_field_matches_closed_form() {
        let p = lmg(0.0, 2.0);
        let mi = macroscopic_mutual_info(&p, &start(), &MeanFieldSettings::default()).unwrap();
        assert_abs_diff_eq!(mi, 0.316559, epsilon = 1e-6);
        assert_abs_diff_eq!(mi, analytic_mutual_info(&p).unwrap(), epsilon = 1e-6);
    }

    #[test]
    fn field_cycle_average_is_valid_state() {
        let report = find_attractor(&lmg(0.5, 2.0), &start(), &MeanFieldSettings::default()).unwrap();
        assert!(report.period().is_some(), "kind {}", report.label());
        let rho = time_average_state(&report).unwrap();
        assert!(rho.matrix().hermiticity_residual() < 1e-12);
        assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integrator_converges_with_tolerance() {
        // error on the analytic cycle shrinks as the tolerance tightens
        let p = lmg(0.0, 2.0);
        let c = analytic_limit_cycle(&p).unwrap();
        let x0 = BlochVector::qubit(0.0, c.m_xy, c.m_z);
        let t_end = 10.0;
        let exact = c.point(c.omega * t_end);
        let err = |rtol: f64| {
            let tol = Tolerances::new(rtol, rtol * 1e-2);
            let tr = integrate(&p, &x0, t_end, &tol).unwrap();
            (distance(&tr.final_state(), &exact), tr.steps().len())
        };
        let (e1, n1) = err(1e-6);
        let (e2, n2) = err(1e-8);
        let (e3, n3) = err(1e-10);
        assert!(e2 < e1 && e3 < e2, "{e1:e} {e2:e} {e3:e}");
        // fifth order: 100x tighter tolerance costs about 100^(1/5) = 2.5x steps
        let r = n3 as f64 / n2 as f64;
        assert!(r > 1.8 && r < 3.5, "step ratio {r} ({n1}, {n2}, {n3})");
    }
}
