//! Cardinal states and qubit encodings.
//!
//! Both qubits use the amplitude order `(↓z, ↑z)`; the photonic rails are
//! `↓z ≡ mode b` (right→left) and `↑z ≡ mode a` (left→right). Equator states
//! are `(|↓z⟩ + e^{iφ}|↑z⟩)/√2`.
//!
//! Atomic states are stored in the logical frame in which an ideal swap maps
//! each cardinal label onto itself. The physical Zeeman amplitudes differ by
//! the sign of the `m_F = +1` component (see [`AtomicQubit::physical`]).

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qdyn::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cardinal {
    UpX,
    DownX,
    UpY,
    DownY,
    UpZ,
    DownZ,
}

impl Cardinal {
    pub const ALL: [Cardinal; 6] = [
        Cardinal::UpX,
        Cardinal::DownX,
        Cardinal::UpY,
        Cardinal::DownY,
        Cardinal::UpZ,
        Cardinal::DownZ,
    ];

    pub fn new(axis: Axis, up: bool) -> Self {
        match (axis, up) {
            (Axis::X, true) => Cardinal::UpX,
            (Axis::X, false) => Cardinal::DownX,
            (Axis::Y, true) => Cardinal::UpY,
            (Axis::Y, false) => Cardinal::DownY,
            (Axis::Z, true) => Cardinal::UpZ,
            (Axis::Z, false) => Cardinal::DownZ,
        }
    }

    pub fn axis(self) -> Axis {
        match self {
            Cardinal::UpX | Cardinal::DownX => Axis::X,
            Cardinal::UpY | Cardinal::DownY => Axis::Y,
            Cardinal::UpZ | Cardinal::DownZ => Axis::Z,
        }
    }

    pub fn is_up(self) -> bool {
        matches!(self, Cardinal::UpX | Cardinal::UpY | Cardinal::UpZ)
    }

    pub fn is_pole(self) -> bool {
        self.axis() == Axis::Z
    }

    pub fn orthogonal(self) -> Self {
        Cardinal::new(self.axis(), !self.is_up())
    }

    /// Amplitudes over `(↓z, ↑z)`.
    pub fn amplitudes(self) -> Vector2<C64> {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        let (d, u) = match self {
            Cardinal::DownZ => (C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
            Cardinal::UpZ => (C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
            Cardinal::UpX => (h, h),
            Cardinal::DownX => (h, -h),
            Cardinal::UpY => (h, C64::new(0.0, FRAC_1_SQRT_2)),
            Cardinal::DownY => (h, C64::new(0.0, -FRAC_1_SQRT_2)),
        };
        Vector2::new(d, u)
    }

    pub fn bloch(self) -> Vector3<f64> {
        let s = if self.is_up() { 1.0 } else { -1.0 };
        match self.axis() {
            Axis::X => Vector3::new(s, 0.0, 0.0),
            Axis::Y => Vector3::new(0.0, s, 0.0),
            Axis::Z => Vector3::new(0.0, 0.0, s),
        }
    }

    pub fn projector(self) -> Matrix2<C64> {
        let v = self.amplitudes();
        v * v.adjoint()
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Cardinal::UpX => "↑x",
            Cardinal::DownX => "↓x",
            Cardinal::UpY => "↑y",
            Cardinal::DownY => "↓y",
            Cardinal::UpZ => "↑z",
            Cardinal::DownZ => "↓z",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Cardinal::UpX => "up_x",
            Cardinal::DownX => "down_x",
            Cardinal::UpY => "up_y",
            Cardinal::DownY => "down_y",
            Cardinal::UpZ => "up_z",
            Cardinal::DownZ => "down_z",
        }
    }
}

impl fmt::Display for Cardinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Cardinal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Cardinal::ALL
            .into_iter()
            .find(|c| c.name() == s || c.symbol() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown cardinal state {s:?}")))
    }
}

fn normalized(amps: Vector2<C64>) -> Result<Vector2<C64>> {
    let n = amps.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidParams("qubit amplitudes must have non-zero finite norm".into()));
    }
    Ok(amps / C64::new(n, 0.0))
}

fn amplitudes_from_bloch(v: &Vector3<f64>) -> Result<Vector2<C64>> {
    let r = v.norm();
    if (r - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParams(format!("Bloch vector must be a unit vector, norm {r}")));
    }
    let theta = v.z.clamp(-1.0, 1.0).acos();
    let phi = v.y.atan2(v.x);
    // north pole is ↑z; (↓, ↑) = (sin θ/2, e^{iφ} cos θ/2) up to global phase
    Ok(Vector2::new(
        C64::new((theta / 2.0).sin(), 0.0),
        C64::from_polar((theta / 2.0).cos(), phi),
    ))
}

/// Bloch vector of a 2×2 density matrix in `(↓z, ↑z)` order.
pub fn bloch_of(rho: &Matrix2<C64>) -> Vector3<f64> {
    let c = rho[(0, 1)];
    // coherence ρ_{↓↑} = a_↓ a_↑*
    Vector3::new(2.0 * c.re, -2.0 * c.im, (rho[(1, 1)] - rho[(0, 0)]).re)
}

/// `⟨ψ|ρ|ψ⟩` for a normalized pure target.
pub fn state_fidelity(rho: &Matrix2<C64>, target: &Vector2<C64>) -> f64 {
    (target.adjoint() * rho * target)[(0, 0)].re
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtomicQubit {
    amps: Vector2<C64>,
}

impl AtomicQubit {
    pub fn new(amps: Vector2<C64>) -> Result<Self> {
        Ok(Self { amps: normalized(amps)? })
    }

    pub fn cardinal(c: Cardinal) -> Self {
        Self { amps: c.amplitudes() }
    }

    pub fn from_bloch(v: &Vector3<f64>) -> Result<Self> {
        Ok(Self {
            amps: amplitudes_from_bloch(v)?,
        })
    }

    /// Logical amplitudes over `(↓z, ↑z)`.
    pub fn amplitudes(&self) -> &Vector2<C64> {
        &self.amps
    }

    /// Zeeman amplitudes over `(m_F = −1, m_F = +1)`.
    pub fn physical(&self) -> Vector2<C64> {
        Vector2::new(self.amps[0], -self.amps[1])
    }

    pub fn from_physical(amps: Vector2<C64>) -> Result<Self> {
        Self::new(Vector2::new(amps[0], -amps[1]))
    }

    pub fn density(&self) -> Matrix2<C64> {
        self.amps * self.amps.adjoint()
    }

    pub fn bloch(&self) -> Vector3<f64> {
        bloch_of(&self.density())
    }
}

/// Maps a density matrix between the logical and physical atomic frames
/// (the map is its own inverse).
pub fn flip_frame(rho: &Matrix2<C64>) -> Matrix2<C64> {
    let mut out = *rho;
    out[(0, 1)] = -out[(0, 1)];
    out[(1, 0)] = -out[(1, 0)];
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhotonicQubit {
    amps: Vector2<C64>,
}

impl PhotonicQubit {
    pub fn new(amps: Vector2<C64>) -> Result<Self> {
        Ok(Self { amps: normalized(amps)? })
    }

    pub fn cardinal(c: Cardinal) -> Self {
        Self { amps: c.amplitudes() }
    }

    /// `(|↓z⟩ + s e^{iφ}|↑z⟩)/√2` with `s = ±1`.
    pub fn equator(phi: f64, plus: bool) -> Self {
        let s = if plus { 1.0 } else { -1.0 };
        Self {
            amps: Vector2::new(
                C64::new(FRAC_1_SQRT_2, 0.0),
                C64::from_polar(s * FRAC_1_SQRT_2, phi),
            ),
        }
    }

    pub fn from_bloch(v: &Vector3<f64>) -> Result<Self> {
        Ok(Self {
            amps: amplitudes_from_bloch(v)?,
        })
    }

    pub fn amplitudes(&self) -> &Vector2<C64> {
        &self.amps
    }

    /// Drive amplitudes `(mode a, mode b)`.
    pub fn mode_amplitudes(&self) -> (C64, C64) {
        (self.amps[1], self.amps[0])
    }

    pub fn density(&self) -> Matrix2<C64> {
        self.amps * self.amps.adjoint()
    }

    pub fn bloch(&self) -> Vector3<f64> {
        bloch_of(&self.density())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardinals_are_unit_and_orthogonal_pairs() {
        for c in Cardinal::ALL {
            let a = c.amplitudes();
            assert!((a.norm() - 1.0).abs() < 1e-15);
            let o = c.orthogonal().amplitudes();
            assert!(a.dotc(&o).norm() < 1e-15);
            let b = AtomicQubit::cardinal(c).bloch();
            assert!((b - c.bloch()).norm() < 1e-12, "{c}: {b:?}");
        }
    }

    #[test]
    fn bloch_round_trip() {
        for c in Cardinal::ALL {
            let q = PhotonicQubit::from_bloch(&c.bloch()).unwrap();
            assert!((state_fidelity(&q.density(), &c.amplitudes()) - 1.0).abs() < 1e-12);
        }
        assert!(AtomicQubit::from_bloch(&Vector3::new(0.5, 0.0, 0.0)).is_err());
    }

    #[test]
    fn equator_matches_cardinals() {
        let p = PhotonicQubit::equator(0.0, true);
        assert!((state_fidelity(&p.density(), &Cardinal::UpX.amplitudes()) - 1.0).abs() < 1e-15);
        let p = PhotonicQubit::equator(std::f64::consts::FRAC_PI_2, false);
        assert!((state_fidelity(&p.density(), &Cardinal::DownY.amplitudes()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn frame_flip_is_involution() {
        let q = AtomicQubit::cardinal(Cardinal::UpY);
        let phys = AtomicQubit::from_physical(q.physical()).unwrap();
        assert!((phys.amplitudes() - q.amplitudes()).norm() < 1e-15);
        let rho = q.density();
        assert_eq!(flip_frame(&flip_frame(&rho)), rho);
    }

    #[test]
    fn parse_labels() {
        assert_eq!("up_x".parse::<Cardinal>().unwrap(), Cardinal::UpX);
        assert_eq!("↓z".parse::<Cardinal>().unwrap(), Cardinal::DownZ);
        assert!("sideways".parse::<Cardinal>().is_err());
    }
}
