//! Heralded preparation of a cardinal atomic state by a swap-in photon.

use serde::{Deserialize, Serialize};

use super::channel::{sprint_channel, ChannelOptions, PhotonSource};
use super::envelope::PulseShape;
use super::params::SystemParams;
use super::qubit::{state_fidelity, AtomicQubit, Cardinal, PhotonicQubit};
use super::scatter::{scatter_analytic, Mode, Pole};
use crate::error::Result;

/// Atomic state left by the last detection pulse before the swap-in; pulses
/// from the ↓z port pump a present atom into ↓z.
pub const PUMPED_STATE: Cardinal = Cardinal::DownZ;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparationRecipe {
    pub target: Cardinal,
    pub initial: Cardinal,
    /// Photonic state of the swap-in pulse.
    pub photon: Cardinal,
    /// Output rail whose click heralds the swap, `0` for ↓z and `1` for ↑z.
    pub herald_rail: usize,
    /// Probability that a heralded trial left the atom in the wrong ground
    /// state.
    pub false_prep: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preparation {
    Heralded,
    Discarded,
}

/// Simulated preparation quality for one pulse shape.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreparationQuality {
    /// Per-photon probability of a herald click before any detection loss.
    pub p_herald: f64,
    pub fidelity: f64,
}

pub fn prepare_atom(target: Cardinal, params: &SystemParams) -> Result<PreparationRecipe> {
    params.validate()?;
    let false_prep = scatter_analytic(params, Pole::Down, Mode::A)?.wrong_state_given_reflection();
    Ok(PreparationRecipe {
        target,
        initial: PUMPED_STATE,
        photon: target,
        herald_rail: if PUMPED_STATE.is_up() { 1 } else { 0 },
        false_prep,
    })
}

impl PreparationRecipe {
    pub fn outcome(&self, herald_clicks: usize) -> Preparation {
        if herald_clicks > 0 {
            Preparation::Heralded
        } else {
            Preparation::Discarded
        }
    }

    /// Runs the swap-in for a single photon and scores the heralded atomic
    /// state against the target.
    pub fn simulate(&self, params: &SystemParams, shape: &PulseShape, opts: &ChannelOptions) -> Result<PreparationQuality> {
        let out = sprint_channel(
            params,
            &AtomicQubit::cardinal(self.initial),
            &PhotonicQubit::cardinal(self.photon),
            shape,
            PhotonSource::Single,
            opts,
        )?;
        Ok(PreparationQuality {
            p_herald: out.p_rail[self.herald_rail],
            fidelity: state_fidelity(&out.atom_given_rail[self.herald_rail], &self.target.amplitudes()),
        })
    }
}
