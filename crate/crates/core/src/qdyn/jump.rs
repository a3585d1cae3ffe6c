//! Quantum-jump unraveling by the waiting-time method: the unnormalized state
//! follows the effective non-Hermitian generator until its squared norm falls
//! to a uniform draw, then one collapse is applied with probability
//! proportional to `‖L_k ψ‖²`.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lindblad::{LindbladKernel, SparseTd, TdOperator};
use super::ode::{Control, Dopri5};
use super::space::C64;
use super::state::PureState;
use crate::error::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct JumpRecord {
    pub t: f64,
    pub channel: usize,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Normalized states on the output grid.
    pub states: Vec<PureState>,
    pub jumps: Vec<JumpRecord>,
}

#[derive(Clone, Debug)]
pub struct JumpOptions {
    pub step_tol: f64,
    pub breakpoints: Vec<f64>,
    pub max_step: f64,
}

impl Default for JumpOptions {
    fn default() -> Self {
        Self {
            step_tol: 1e-8,
            breakpoints: Vec::new(),
            max_step: f64::INFINITY,
        }
    }
}

fn apply_td(op: &SparseTd, t: f64, v: &[C64], out: &mut [C64]) {
    out.iter_mut().for_each(|z| *z = ZERO);
    for (s, c) in &op.terms {
        let c = c.at(t);
        if c != ZERO {
            s.apply(c, v, out);
        }
    }
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// One trajectory. `stream` selects an independent counter-based substream
/// of `seed`, so trajectories can be generated in any order.
pub fn evolve_jump(
    psi0: &PureState,
    hamiltonian: &TdOperator,
    collapses: &[TdOperator],
    t_grid: &[f64],
    seed: u64,
    stream: u64,
    opts: &JumpOptions,
) -> Result<Trajectory> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::TimeGrid);
    }
    if hamiltonian.space() != psi0.space() {
        return Err(Error::ShapeMismatch {
            expected: psi0.space().total_dim(),
            found: hamiltonian.space().total_dim(),
        });
    }
    let kernel = LindbladKernel::new(hamiltonian, collapses)?;
    let n = kernel.n;
    let space = psi0.space().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);

    let mut tmp = vec![ZERO; n];
    let mut lpsi = vec![ZERO; n];
    let rhs = |t: f64, psi: &[C64], dpsi: &mut [C64]| {
        dpsi.iter_mut().for_each(|z| *z = ZERO);
        let mi = C64::new(0.0, -1.0);
        for (s, c) in &kernel.hamiltonian.terms {
            let c = c.at(t);
            if c != ZERO {
                s.apply(mi * c, psi, dpsi);
            }
        }
        for col in &kernel.collapses {
            apply_td(col, t, psi, &mut tmp);
            for (s, c) in &col.terms {
                let c = c.at(t);
                if c != ZERO {
                    s.apply_dagger(C64::new(-0.5, 0.0) * c.conj(), &tmp, dpsi);
                }
            }
        }
    };

    let mut times = vec![t_grid[0]];
    let mut states = vec![psi0.clone()];
    let mut jumps = Vec::new();
    let mut next = 1;
    let mut target: f64 = rng.random::<f64>();
    let mut buf = vec![ZERO; n];
    let mut solver = Dopri5::with_tol(opts.step_tol);
    solver.h_max = opts.max_step;
    let y0: Vec<C64> = psi0.amplitudes().iter().copied().collect();
    let t_end = *t_grid.last().unwrap();
    if t_end > t_grid[0] {
        solver.integrate(rhs, t_grid[0], y0, t_end, &opts.breakpoints, |step| {
            let t1 = step.t1();
            step.eval_into(t1, &mut buf);
            let jump_at = if norm2(&buf) <= target {
                // bisection on the dense output for the crossing time
                let (mut lo, mut hi) = (step.t0, t1);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    step.eval_into(mid, &mut buf);
                    if norm2(&buf) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-12 * hi.abs().max(1.0) {
                        break;
                    }
                }
                Some(hi)
            } else {
                None
            };
            let t_out_end = jump_at.unwrap_or(t1);
            while next < t_grid.len() && t_grid[next] <= t_out_end + 1e-12 * t_out_end.abs().max(1.0) {
                step.eval_into(t_grid[next], &mut buf);
                let nrm = norm2(&buf).sqrt();
                times.push(t_grid[next]);
                states.push(PureState::from_raw(
                    &space,
                    DVector::from_iterator(n, buf.iter().map(|z| z / nrm)),
                ));
                next += 1;
            }
            let Some(tj) = jump_at else {
                return Ok(Control::Continue);
            };
            step.eval_into(tj, &mut buf);
            let weights: Vec<f64> = kernel
                .collapses
                .iter()
                .map(|col| {
                    apply_td(col, tj, &buf, &mut lpsi);
                    norm2(&lpsi)
                })
                .collect();
            let total: f64 = weights.iter().sum();
            if !(total > 0.0) {
                return Err(Error::Invariant {
                    t: tj,
                    what: "jump requested with no open channel".into(),
                });
            }
            let mut u = rng.random::<f64>() * total;
            let mut channel = weights.len() - 1;
            for (k, w) in weights.iter().enumerate() {
                if u < *w {
                    channel = k;
                    break;
                }
                u -= w;
            }
            apply_td(&kernel.collapses[channel], tj, &buf, &mut lpsi);
            let nrm = norm2(&lpsi).sqrt();
            jumps.push(JumpRecord { t: tj, channel });
            target = rng.random::<f64>();
            Ok(Control::Jump {
                t: tj,
                y: lpsi.iter().map(|z| z / nrm).collect(),
            })
        })?;
    }
    Ok(Trajectory { times, states, jumps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qdyn::space::{embed, make_space, transition};

    #[test]
    fn decay_waiting_times_are_exponential() {
        let s = make_space(&[2]).unwrap();
        let gamma: f64 = 0.5;
        let lower = embed(&transition(2, 0, 1), 0, &s)
            .unwrap()
            .scale(C64::new((2.0 * gamma).sqrt(), 0.0));
        let h = TdOperator::zero(&s);
        let psi = PureState::basis(&s, 1);
        let ntraj = 2000;
        let mut mean = 0.0;
        let mut count = 0;
        for k in 0..ntraj {
            let tr = evolve_jump(&psi, &h, &[lower.clone().into()], &[0.0, 30.0], 7, k, &JumpOptions::default()).unwrap();
            if let Some(j) = tr.jumps.first() {
                mean += j.t;
                count += 1;
            }
            assert!(tr.jumps.len() <= 1);
        }
        mean /= count as f64;
        // exact mean lifetime 1/(2γ) = 1, standard error ~0.022
        assert!((mean - 1.0).abs() < 0.1, "mean waiting time {mean}");
    }

    #[test]
    fn same_stream_reproduces() {
        let s = make_space(&[2]).unwrap();
        let lower = embed(&transition(2, 0, 1), 0, &s).unwrap();
        let h = TdOperator::zero(&s);
        let psi = PureState::basis(&s, 1);
        let a = evolve_jump(&psi, &h, &[lower.clone().into()], &[0.0, 10.0], 3, 11, &JumpOptions::default()).unwrap();
        let b = evolve_jump(&psi, &h, &[lower.into()], &[0.0, 10.0], 3, 11, &JumpOptions::default()).unwrap();
        assert_eq!(a.jumps, b.jumps);
    }
}
