//! Dormand–Prince 5(4) stepper over flat complex state vectors, with the
//! Hairer continuous extension for output between accepted steps.

use super::space::C64;
use crate::error::{Error, Result};

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

#[derive(Clone, Copy, Debug)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_init: f64,
}

impl Dopri5 {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            h_max: f64::INFINITY,
            h_init: 1e-2,
        }
    }
}

/// One accepted step, interpolable on `[t0, t0 + h]`.
pub struct DenseStep<'a> {
    pub t0: f64,
    pub h: f64,
    rc: &'a [Vec<C64>; 5],
}

impl DenseStep<'_> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval_into(&self, t: f64, out: &mut [C64]) {
        let theta = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = self.rc;
        for i in 0..out.len() {
            out[i] = r1[i] + (r2[i] + (r3[i] + (r4[i] + r5[i] * theta1) * theta) * theta1) * theta;
        }
    }

    pub fn eval(&self, t: f64) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.rc[0].len()];
        self.eval_into(t, &mut out);
        out
    }
}

pub enum Control {
    Continue,
    /// Restart from a modified state at a time inside the last step.
    Jump { t: f64, y: Vec<C64> },
}

impl Dopri5 {
    /// Integrates `y' = rhs(t, y)` from `t0` to `t_end`. Steps never straddle
    /// a breakpoint; the derivative is re-evaluated after each one.
    pub fn integrate<F, O>(
        &self,
        mut rhs: F,
        t0: f64,
        y0: Vec<C64>,
        t_end: f64,
        breakpoints: &[f64],
        mut on_step: O,
    ) -> Result<Vec<C64>>
    where
        F: FnMut(f64, &[C64], &mut [C64]),
        O: FnMut(&DenseStep<'_>) -> Result<Control>,
    {
        let n = y0.len();
        let zero = C64::new(0.0, 0.0);
        let mut y = y0;
        let mut t = t0;
        let mut k: [Vec<C64>; 7] = std::array::from_fn(|_| vec![zero; n]);
        let mut tmp = vec![zero; n];
        let mut y_new = vec![zero; n];
        let mut rc: [Vec<C64>; 5] = std::array::from_fn(|_| vec![zero; n]);
        let mut h = self.h_init.min(self.h_max).min(t_end - t0).max(1e-12);
        let mut fresh = true;
        let mut bps: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&b| b > t0 && b < t_end)
            .collect();
        bps.sort_by(f64::total_cmp);
        let mut next_bp = 0;

        while t < t_end {
            if fresh {
                let (k0, _) = k.split_at_mut(1);
                rhs(t, &y, &mut k0[0]);
                fresh = false;
            }
            while next_bp < bps.len() && bps[next_bp] <= t {
                next_bp += 1;
            }
            let limit = if next_bp < bps.len() { bps[next_bp] } else { t_end };
            let mut hit_limit = false;
            if t + h >= limit {
                h = limit - t;
                hit_limit = true;
            }
            if h <= 1e-13 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t, h });
            }

            // stages
            macro_rules! stage {
                ($dst:expr, $c:expr, [$(($a:expr, $ki:expr)),*]) => {{
                    for i in 0..n {
                        let mut acc = y[i];
                        $( acc += k[$ki][i] * ($a * h); )*
                        tmp[i] = acc;
                    }
                    let (_, rest) = k.split_at_mut($dst);
                    rhs(t + $c * h, &tmp, &mut rest[0]);
                }};
            }
            stage!(1, C2, [(A21, 0)]);
            stage!(2, C3, [(A31, 0), (A32, 1)]);
            stage!(3, C4, [(A41, 0), (A42, 1), (A43, 2)]);
            stage!(4, C5, [(A51, 0), (A52, 1), (A53, 2), (A54, 3)]);
            stage!(5, 1.0, [(A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4)]);
            for i in 0..n {
                y_new[i] = y[i]
                    + (k[0][i] * A71 + k[2][i] * A73 + k[3][i] * A74 + k[4][i] * A75 + k[5][i] * A76)
                        * h;
            }
            {
                let (_, rest) = k.split_at_mut(6);
                rhs(t + h, &y_new, &mut rest[0]);
            }

            let mut err2 = 0.0;
            for i in 0..n {
                let e = (k[0][i] * E1
                    + k[2][i] * E3
                    + k[3][i] * E4
                    + k[4][i] * E5
                    + k[5][i] * E6
                    + k[6][i] * E7)
                    * h;
                let sc = self.atol + self.rtol * y[i].norm().max(y_new[i].norm());
                err2 += (e.norm() / sc).powi(2);
            }
            let err = (err2 / n.max(1) as f64).sqrt();

            if err <= 1.0 {
                for i in 0..n {
                    let dy = y_new[i] - y[i];
                    let bspl = k[0][i] * h - dy;
                    rc[0][i] = y[i];
                    rc[1][i] = dy;
                    rc[2][i] = bspl;
                    rc[3][i] = dy - k[6][i] * h - bspl;
                    rc[4][i] = (k[0][i] * D1
                        + k[2][i] * D3
                        + k[3][i] * D4
                        + k[4][i] * D5
                        + k[5][i] * D6
                        + k[6][i] * D7)
                        * h;
                }
                let step = DenseStep { t0: t, h, rc: &rc };
                match on_step(&step)? {
                    Control::Continue => {
                        t = if hit_limit { limit } else { t + h };
                        std::mem::swap(&mut y, &mut y_new);
                        if hit_limit && limit < t_end {
                            fresh = true;
                        } else {
                            let (k0, rest) = k.split_at_mut(1);
                            k0[0].copy_from_slice(&rest[5]);
                        }
                    }
                    Control::Jump { t: tj, y: yj } => {
                        t = tj;
                        y = yj;
                        fresh = true;
                    }
                }
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = (h * fac).min(self.h_max);
            } else {
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
                h *= fac;
            }
        }
        Ok(y)
    }
}
