//! 50/50 beam splitter with a phase on one arm, mapping the two interferometer
//! ports onto the two propagation rails.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{Matrix2, Vector2};

use crate::qdyn::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Encode,
    Decode,
}

/// Port amplitudes → rail amplitudes `(↓z, ↑z)`. Port 1 gives
/// `(|↓z⟩ + e^{iφ}|↑z⟩)/√2` and port 2 the orthogonal state.
pub fn beam_splitter(phi: f64) -> Matrix2<C64> {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    let e = C64::from_polar(FRAC_1_SQRT_2, phi);
    Matrix2::new(h, h, e, -e)
}

pub fn interferometer(ports: &Vector2<C64>, phi: f64, direction: Direction) -> Vector2<C64> {
    let u = beam_splitter(phi);
    match direction {
        Direction::Encode => u * ports,
        Direction::Decode => u.adjoint() * ports,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::qubit::Cardinal;

    fn port(k: usize) -> Vector2<C64> {
        let mut v = Vector2::zeros();
        v[k] = C64::new(1.0, 0.0);
        v
    }

    #[test]
    fn port_one_gives_up_x() {
        let out = interferometer(&port(0), 0.0, Direction::Encode);
        assert!((out - Cardinal::UpX.amplitudes()).norm() < 1e-15);
    }

    #[test]
    fn ports_are_orthogonal() {
        let a = interferometer(&port(0), 0.0, Direction::Encode);
        let b = interferometer(&port(1), 0.0, Direction::Encode);
        assert!(a.dotc(&b).norm() < 1e-15);
    }

    #[test]
    fn decode_inverts_encode() {
        for phi in [0.0, 0.3, 1.7, -2.5] {
            let v = Vector2::new(C64::new(0.6, 0.1), C64::new(-0.2, 0.7));
            let back = interferometer(&interferometer(&v, phi, Direction::Encode), phi, Direction::Decode);
            assert!((back - v).norm() < 1e-12);
        }
    }
}
