//! Dormand–Prince 5(4) with step-size control and 4th-order dense output.

use crate::error::{Error, Result};

/// Error-control settings for [`integrate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Hard cap on accepted plus rejected steps.
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 50_000_000,
        }
    }
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }
}

/// One accepted step `[t, t + h]` with its continuous extension.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseStep {
    pub t: f64,
    pub h: f64,
    rcont: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn t_end(&self) -> f64 {
        self.t + self.h
    }

    pub fn start(&self) -> &[f64] {
        &self.rcont[0]
    }

    pub fn end(&self) -> Vec<f64> {
        self.rcont[0]
            .iter()
            .zip(&self.rcont[1])
            .map(|(a, b)| a + b)
            .collect()
    }

    /// Interpolated state at `t` (accurate on `[self.t, self.t_end()]`).
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let s = (t - self.t) / self.h;
        let s1 = 1.0 - s;
        let [r0, r1, r2, r3, r4] = &self.rcont;
        for i in 0..out.len() {
            out[i] = r0[i] + s * (r1[i] + s1 * (r2[i] + s * (r3[i] + s1 * r4[i])));
        }
    }
}

/// What the per-step observer wants the integrator to do next.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrates `y' = f(t, y)` from `t0` to `t_end`, handing each accepted step
/// to `observer`. Returns the state at the last accepted step.
///
/// Fails with [`Error::StepSizeUnderflow`] when the controller asks for a step
/// below `1e-14 · |t_end - t0|`.
pub fn integrate<F, O>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    tol: &Tolerances,
    mut observer: O,
) -> Result<(f64, Vec<f64>)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(&DenseStep) -> Result<Control>,
{
    let n = y0.len();
    let span = t_end - t0;
    if span <= 0.0 {
        return Ok((t0, y0.to_vec()));
    }
    let min_step = 1e-14 * span;
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    f(t, &y, &mut k1);
    let mut h = initial_step(&mut f, t, &y, &k1, span, tol);
    let mut err_prev: f64 = 1e-4;
    let mut steps = 0usize;
    let mut rejected_last = false;

    loop {
        if steps >= tol.max_steps {
            return Err(Error::StepSizeUnderflow {
                t,
                step: h,
                min_step,
            });
        }
        steps += 1;
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, &tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, &tmp, &mut k5);
        for i in 0..n {
            tmp[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + h, &tmp, &mut k6);
        for i in 0..n {
            y1[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t + h, &y1, &mut k7);

        let mut err = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol.atol + tol.rtol * y[i].abs().max(y1[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = if n > 0 { (err / n as f64).sqrt() } else { 0.0 };

        if err <= 1.0 {
            let rcont = [
                y.clone(),
                y1.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>(),
                (0..n).map(|i| h * k1[i] - (y1[i] - y[i])).collect::<Vec<_>>(),
                vec![0.0; n],
                (0..n)
                    .map(|i| {
                        h * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i])
                    })
                    .collect::<Vec<_>>(),
            ];
            let mut rcont = rcont;
            for i in 0..n {
                rcont[3][i] = rcont[1][i] - h * k7[i] - rcont[2][i];
            }
            let step = DenseStep { t, h, rcont };
            t = if last { t_end } else { t + h };
            std::mem::swap(&mut y, &mut y1);
            std::mem::swap(&mut k1, &mut k7);
            if observer(&step)? == Control::Stop || last {
                return Ok((t, y));
            }
            // PI controller (Hairer's beta = 0.04)
            let err_c = err.max(1e-10);
            let mut fac = 0.9 * err_c.powf(-0.17) * err_prev.powf(0.04);
            fac = fac.clamp(0.2, 10.0);
            if rejected_last {
                fac = fac.min(1.0);
            }
            err_prev = err_c;
            rejected_last = false;
            h *= fac;
        } else {
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).max(0.2)
            } else {
                0.2
            };
            h *= fac;
            rejected_last = true;
        }
        if h.abs() < min_step {
            return Err(Error::StepSizeUnderflow {
                t,
                step: h,
                min_step,
            });
        }
    }
}

fn initial_step<F>(f: &mut F, t: f64, y: &[f64], f0: &[f64], span: f64, tol: &Tolerances) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    if n == 0 {
        return span;
    }
    let sc: Vec<f64> = y.iter().map(|v| tol.atol + tol.rtol * v.abs()).collect();
    let rms = |v: &[f64]| {
        (v.iter().zip(&sc).map(|(a, s)| (a / s) * (a / s)).sum::<f64>() / n as f64).sqrt()
    };
    let d0 = rms(y);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; n];
    f(t + h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}
