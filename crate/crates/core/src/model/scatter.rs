//! Steady-state single-excitation response to a weak monochromatic probe.

use nalgebra::{Matrix5, Vector5};
use serde::Serialize;

use super::params::SystemParams;
use crate::error::{Error, Result};
use crate::qdyn::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Pole {
    Down,
    Up,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Mode {
    A,
    B,
}

impl Pole {
    pub fn flipped(self) -> Self {
        match self {
            Pole::Down => Pole::Up,
            Pole::Up => Pole::Down,
        }
    }
}

impl Mode {
    pub fn other(self) -> Self {
        match self {
            Mode::A => Mode::B,
            Mode::B => Mode::A,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScatterOutcome {
    /// Same mode out, atom unchanged.
    pub t_amp: C64,
    /// Other mode out, atom flipped.
    pub r_amp: C64,
    pub p_trans: f64,
    pub p_toggle: f64,
    /// Other mode out, atom unchanged (crosstalk only).
    pub p_reflect_keep: f64,
    /// Same mode out, atom flipped (crosstalk only).
    pub p_trans_flip: f64,
    pub p_loss: f64,
}

impl ScatterOutcome {
    /// Probability of leaving in the other mode, whatever the atom does.
    pub fn p_reflect(&self) -> f64 {
        self.p_toggle + self.p_reflect_keep
    }

    /// Probability that the atom ends in the wrong state given a reflection.
    pub fn wrong_state_given_reflection(&self) -> f64 {
        let r = self.p_reflect();
        if r > 0.0 {
            self.p_reflect_keep / r
        } else {
            0.0
        }
    }
}

fn idx(pole: Pole, mode: Mode) -> usize {
    // amplitudes: 0 = |e⟩, then |pole, 1_mode⟩
    1 + match (pole, mode) {
        (Pole::Down, Mode::A) => 0,
        (Pole::Down, Mode::B) => 1,
        (Pole::Up, Mode::A) => 2,
        (Pole::Up, Mode::B) => 3,
    }
}

/// Solves the coupled-mode equations for a unit-flux probe in `input` with
/// the atom in `atom`, using `out = in + √(2κ_ex)·(cavity amplitude)`.
pub fn scatter_analytic(params: &SystemParams, atom: Pole, input: Mode) -> Result<ScatterOutcome> {
    params.validate()?;
    let r = params.rates();
    let (gm, gc) = (r.g * (1.0 - params.epsilon).sqrt(), r.g * params.epsilon.sqrt());
    let coupling = |pole: Pole, mode: Mode| match (pole, mode) {
        (Pole::Down, Mode::A) | (Pole::Up, Mode::B) => gm,
        _ => gc,
    };
    let i = C64::new(0.0, 1.0);
    let cav = C64::new(r.kappa(), r.delta);
    let mut m = Matrix5::<C64>::zeros();
    let mut rhs = Vector5::<C64>::zeros();
    m[(0, 0)] = C64::new(r.gamma, r.delta);
    for pole in [Pole::Down, Pole::Up] {
        for mode in [Mode::A, Mode::B] {
            let k = idx(pole, mode);
            let g = coupling(pole, mode);
            // 0 = −(κ + iΔ)X − i g E − √(2κ_ex) α
            m[(k, k)] = cav;
            m[(k, 0)] = i * g;
            // 0 = −(γ + iΔ)E − i Σ g X
            m[(0, k)] = i * g;
        }
    }
    let sqk = (2.0 * r.kappa_ex).sqrt();
    rhs[idx(atom, input)] = C64::new(-sqk, 0.0);
    let x = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidParams("singular scattering system".into()))?;
    let out = |pole: Pole, mode: Mode| {
        let direct = if pole == atom && mode == input { 1.0 } else { 0.0 };
        C64::new(direct, 0.0) + sqk * x[idx(pole, mode)]
    };
    let t_amp = out(atom, input);
    let r_amp = out(atom.flipped(), input.other());
    let p_trans = t_amp.norm_sqr();
    let p_toggle = r_amp.norm_sqr();
    let p_reflect_keep = out(atom, input.other()).norm_sqr();
    let p_trans_flip = out(atom.flipped(), input).norm_sqr();
    let p_loss = (1.0 - p_trans - p_toggle - p_reflect_keep - p_trans_flip).max(0.0);
    Ok(ScatterOutcome {
        t_amp,
        r_amp,
        p_trans,
        p_toggle,
        p_reflect_keep,
        p_trans_flip,
        p_loss,
    })
}
