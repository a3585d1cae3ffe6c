//! Pulse trains for one repetition of the experimental sequence.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::envelope::DEFAULT_EDGE_NS;
use crate::model::{Axis, Cardinal, PulseShape};
use crate::qdyn::C64;

/// Minimum gap between the last detection pulse and the first swap pulse.
pub const SWAP_GUARD_NS: f64 = 200.0;
/// Minimum tail-to-tail gap between the two swap pulses.
pub const SWAP_TAIL_GAP_NS: f64 = 200.0;
/// Minimum peak-to-peak spacing of the two swap pulses.
pub const SWAP_PEAK_GAP_NS: f64 = 300.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Detection,
    SwapIn,
    SwapOut,
    Erasure,
}

impl Role {
    pub fn default_duration(self) -> f64 {
        match self {
            Role::Detection | Role::Erasure => 10.0,
            Role::SwapIn | Role::SwapOut => 50.0,
        }
    }

    pub fn default_mean_photons(self) -> f64 {
        match self {
            Role::Detection => 1.2,
            Role::Erasure => 1.2 * 1.2,
            Role::SwapIn => 0.8,
            Role::SwapOut => 0.05,
        }
    }

    pub fn is_swap(self) -> bool {
        matches!(self, Role::SwapIn | Role::SwapOut)
    }
}

/// Where a pulse enters. Equator ports use the phase of the active layout;
/// `Injection` carries the photonic state prepared for the trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Port {
    UpZ,
    DownZ,
    EquatorPlus,
    EquatorMinus,
    Injection,
}

/// Optical configuration of the swap-pulse path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Layout {
    Poles,
    Equator { phi: f64 },
}

impl Layout {
    /// The layout that measures the axis of `c`.
    pub fn for_axis(axis: Axis) -> Self {
        match axis {
            Axis::Z => Layout::Poles,
            Axis::X => Layout::Equator { phi: 0.0 },
            Axis::Y => Layout::Equator { phi: FRAC_PI_2 },
        }
    }

    /// Rail states received by the left and right detector banks.
    pub fn basis(&self) -> [Vector2<C64>; 2] {
        match *self {
            Layout::Poles => [Cardinal::DownZ.amplitudes(), Cardinal::UpZ.amplitudes()],
            Layout::Equator { phi } => {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                let e = C64::from_polar(h, phi);
                [Vector2::new(C64::new(h, 0.0), -e), Vector2::new(C64::new(h, 0.0), e)]
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pulse {
    pub role: Role,
    pub port: Port,
    pub start: f64,
    pub duration: f64,
    pub mean_photons: f64,
    /// Rise and fall time of the envelope.
    #[serde(default = "default_edge")]
    pub edge: f64,
}

fn default_edge() -> f64 {
    DEFAULT_EDGE_NS
}

impl Pulse {
    pub fn new(role: Role, port: Port, start: f64) -> Self {
        Self {
            role,
            port,
            start,
            duration: role.default_duration(),
            mean_photons: role.default_mean_photons(),
            edge: DEFAULT_EDGE_NS,
        }
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn peak(&self) -> f64 {
        self.start + 0.5 * self.duration
    }

    pub fn shape(&self) -> Result<PulseShape> {
        PulseShape::new(self.duration, self.edge)
    }

    /// Rail amplitudes of the injected photon, `(↓z, ↑z)`.
    pub fn photon(&self, layout: &Layout, injected: Cardinal) -> Vector2<C64> {
        match self.port {
            Port::UpZ => Cardinal::UpZ.amplitudes(),
            Port::DownZ => Cardinal::DownZ.amplitudes(),
            Port::EquatorPlus | Port::EquatorMinus => {
                let phi = match layout {
                    Layout::Equator { phi } => *phi,
                    Layout::Poles => 0.0,
                };
                layout_equator(phi, self.port == Port::EquatorPlus)
            }
            Port::Injection => injected.amplitudes(),
        }
    }

    /// Bank that sees a reflection, defined for pole ports only.
    pub fn reflection_side(&self) -> Option<super::Side> {
        match self.port {
            Port::UpZ => Some(super::Side::Left),
            Port::DownZ => Some(super::Side::Right),
            _ => None,
        }
    }
}

fn layout_equator(phi: f64, plus: bool) -> Vector2<C64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let e = C64::from_polar(h, phi);
    Vector2::new(C64::new(h, 0.0), if plus { e } else { -e })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    pub pulses: Vec<Pulse>,
    /// Repetition period; trials are laid end to end with this spacing.
    pub period: f64,
    /// Gap between the end of the swap-in and the start of the swap-out.
    pub storage_delay: f64,
    /// Extra time after a pulse during which clicks are attributed to it.
    pub window_tail: f64,
    /// Click-free stretch at the end of the period, used to measure the
    /// background rate.
    pub dark_start: f64,
}

impl SequenceSpec {
    /// Four detection pulses, the swap pair, the erasure pulse and three more
    /// detection pulses.
    pub fn canonical() -> Self {
        let mut pulses = Vec::new();
        for (i, port) in [Port::UpZ, Port::DownZ, Port::UpZ, Port::DownZ].into_iter().enumerate() {
            pulses.push(Pulse::new(Role::Detection, port, 250.0 * i as f64));
        }
        pulses.push(Pulse::new(Role::SwapIn, Port::Injection, 1010.0));
        pulses.push(Pulse::new(Role::SwapOut, Port::UpZ, 1360.0));
        pulses.push(Pulse::new(Role::Erasure, Port::UpZ, 1660.0));
        for (i, port) in [Port::DownZ, Port::UpZ, Port::DownZ].into_iter().enumerate() {
            pulses.push(Pulse::new(Role::Detection, port, 1910.0 + 250.0 * i as f64));
        }
        Self {
            pulses,
            period: 3000.0,
            storage_delay: 300.0,
            window_tail: 20.0,
            dark_start: 2670.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Sequence(m));
        if !(self.period > 0.0) || !(self.window_tail >= 0.0) {
            return bad("period must be positive and window tail non-negative".into());
        }
        for (i, p) in self.pulses.iter().enumerate() {
            if !(p.duration > 0.0) || !p.start.is_finite() || p.start < 0.0 {
                return bad(format!("pulse {i}: start must be ≥ 0 and duration > 0"));
            }
            if p.shape().is_err() {
                return bad(format!("pulse {i}: edges must fit inside the pulse"));
            }
            if !(p.mean_photons >= 0.0) || !p.mean_photons.is_finite() {
                return bad(format!("pulse {i}: mean photon number must be ≥ 0"));
            }
            if p.role == Role::SwapIn && p.port != Port::Injection {
                return bad(format!("pulse {i}: swap-in must use the injection port"));
            }
            if p.role != Role::SwapIn && p.port == Port::Injection {
                return bad(format!("pulse {i}: only the swap-in uses the injection port"));
            }
            if p.role == Role::Detection && p.reflection_side().is_none() {
                return bad(format!("pulse {i}: detection pulses need a pole port"));
            }
        }
        for (i, w) in self.pulses.windows(2).enumerate() {
            if w[1].start < w[0].end() + self.window_tail {
                return bad(format!("pulse windows {i} and {} overlap or are out of order", i + 1));
            }
        }
        if let Some(last) = self.pulses.last() {
            if last.end() + self.window_tail > self.dark_start || self.dark_start >= self.period {
                return bad("pulses must end before the dark interval, inside the period".into());
            }
        }
        let find = |role| {
            let idx: Vec<usize> = self.pulses.iter().enumerate().filter(|(_, p)| p.role == role).map(|(i, _)| i).collect();
            idx
        };
        let (swap_in, swap_out) = (find(Role::SwapIn), find(Role::SwapOut));
        if swap_in.len() != 1 || swap_out.len() != 1 {
            return bad("exactly one swap-in and one swap-out pulse required".into());
        }
        let (si, so) = (&self.pulses[swap_in[0]], &self.pulses[swap_out[0]]);
        if so.start <= si.start {
            return bad("swap-out must follow swap-in".into());
        }
        let before: Vec<&Pulse> = self.pulses[..swap_in[0]].iter().filter(|p| p.role == Role::Detection).collect();
        let after = self.pulses[swap_out[0]..].iter().filter(|p| p.role == Role::Detection).count();
        let Some(last_det) = before.last() else {
            return bad("at least one detection pulse must precede the swaps".into());
        };
        if after == 0 {
            return bad("at least one detection pulse must follow the swaps".into());
        }
        if si.start - last_det.end() <= SWAP_GUARD_NS {
            return bad(format!("swap pulses must begin more than {SWAP_GUARD_NS} ns after the detection pulses"));
        }
        if so.start - si.end() <= SWAP_TAIL_GAP_NS || so.peak() - si.peak() <= SWAP_PEAK_GAP_NS {
            return bad("swap pulses too close together".into());
        }
        if ((so.start - si.end()) - self.storage_delay).abs() > 1e-6 {
            return bad(format!(
                "storage delay {} does not match the swap pulse gap {}",
                self.storage_delay,
                so.start - si.end()
            ));
        }
        Ok(())
    }

    pub fn swap_in(&self) -> &Pulse {
        self.pulses.iter().find(|p| p.role == Role::SwapIn).expect("validated sequence")
    }

    pub fn swap_out(&self) -> &Pulse {
        self.pulses.iter().find(|p| p.role == Role::SwapOut).expect("validated sequence")
    }

    /// Index and detection window `[start, end)` of every pulse.
    pub fn windows(&self) -> Vec<(f64, f64)> {
        self.pulses.iter().map(|p| (p.start, p.end() + self.window_tail)).collect()
    }

    pub fn dark_duration(&self) -> f64 {
        self.period - self.dark_start
    }

    /// Whether pulse `i` comes before the swap-in.
    pub fn before_swaps(&self, i: usize) -> bool {
        self.pulses[i].start < self.swap_in().start
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_is_valid() {
        let s = SequenceSpec::canonical();
        s.validate().unwrap();
        let det = s.pulses.iter().filter(|p| p.role == Role::Detection).count();
        assert_eq!(det, 7);
        assert_eq!(s.pulses.len(), 10);
    }

    #[test]
    fn swap_too_close_to_detection_rejected() {
        let mut s = SequenceSpec::canonical();
        for p in s.pulses.iter_mut().filter(|p| p.role.is_swap()) {
            p.start -= 100.0;
        }
        assert!(matches!(s.validate(), Err(Error::Sequence(_))));
    }

    #[test]
    fn storage_delay_must_match() {
        let mut s = SequenceSpec::canonical();
        s.storage_delay = 250.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn equator_layout_basis_is_orthonormal() {
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let [l, r] = Layout::for_axis(axis).basis();
            assert!((l.norm() - 1.0).abs() < 1e-12 && (r.norm() - 1.0).abs() < 1e-12);
            assert!(l.dotc(&r).norm() < 1e-12);
            // the right bank receives the up cardinal of the axis
            assert!((r.dotc(&Cardinal::new(axis, true).amplitudes()).norm() - 1.0).abs() < 1e-12);
        }
    }
}
