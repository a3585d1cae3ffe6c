//! Optical losses and photon counters between the resonator and the clicks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Side::Left
        } else {
            Side::Right
        }
    }

    pub fn other(self) -> Self {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// What happened to one photon that left the resonator toward a bank.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Delivery {
    Click { detector: usize },
    Lost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionChain {
    /// Power transmission of the whole tapered fiber; an output photon
    /// crosses half of it.
    pub fiber_transmission: f64,
    pub path_efficiency: f64,
    /// Per-detector efficiencies, left bank first.
    pub spcm_efficiencies: Vec<f64>,
    pub detectors_per_side: usize,
    /// Fraction of returning light the circulator sends to the detectors.
    pub circulator_split: f64,
    /// Extra loss toward each bank, `[left, right]`.
    #[serde(default)]
    pub defect_loss: Option<[f64; 2]>,
    /// Background clicks per ns, summed over all detectors.
    pub false_click_rate: f64,
    /// Probability that a click is followed by an afterpulse on the same
    /// detector.
    #[serde(default)]
    pub afterpulse_probability: f64,
}

impl DetectionChain {
    pub const SPCM_RANGE: [f64; 2] = [0.55, 0.60];

    /// Nominal loss budget with detector efficiencies drawn once from the
    /// quoted range.
    pub fn nominal<R: Rng>(rng: &mut R) -> Self {
        let detectors_per_side = 5;
        let [lo, hi] = Self::SPCM_RANGE;
        let spcm_efficiencies = (0..2 * detectors_per_side).map(|_| rng.random_range(lo..=hi)).collect();
        Self {
            fiber_transmission: 0.90,
            path_efficiency: 0.615,
            spcm_efficiencies,
            detectors_per_side,
            circulator_split: 0.97,
            defect_loss: None,
            false_click_rate: 2e-5,
            afterpulse_probability: 0.01,
        }
    }

    /// Lossless, noiseless counters.
    pub fn ideal() -> Self {
        Self {
            fiber_transmission: 1.0,
            path_efficiency: 1.0,
            spcm_efficiencies: vec![1.0; 10],
            detectors_per_side: 5,
            circulator_split: 1.0,
            defect_loss: None,
            false_click_rate: 0.0,
            afterpulse_probability: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        let mut ok = unit(self.fiber_transmission)
            && unit(self.path_efficiency)
            && unit(self.circulator_split)
            && unit(self.afterpulse_probability)
            && self.spcm_efficiencies.iter().all(|&e| unit(e));
        if let Some(d) = self.defect_loss {
            ok &= d.iter().all(|&x| unit(x));
        }
        if !ok {
            return Err(Error::InvalidParams("detection-chain efficiencies must lie in [0, 1]".into()));
        }
        if self.detectors_per_side == 0 || self.spcm_efficiencies.len() != 2 * self.detectors_per_side {
            return Err(Error::InvalidParams(format!(
                "expected {} detector efficiencies, found {}",
                2 * self.detectors_per_side,
                self.spcm_efficiencies.len()
            )));
        }
        if !(self.false_click_rate >= 0.0) || !self.false_click_rate.is_finite() {
            return Err(Error::InvalidParams("false click rate must be ≥ 0".into()));
        }
        Ok(())
    }

    pub fn n_detectors(&self) -> usize {
        2 * self.detectors_per_side
    }

    pub fn detector_side(&self, id: usize) -> Side {
        Side::from_index(id / self.detectors_per_side)
    }

    /// Transmission from the resonator to the front of a detector bank.
    pub fn optical_transmission(&self, side: Side) -> f64 {
        let defect = self.defect_loss.map_or(0.0, |d| d[side.index()]);
        self.fiber_transmission.sqrt() * self.circulator_split * self.path_efficiency * (1.0 - defect)
    }

    /// Probability that a photon leaving the resonator toward `side` clicks.
    pub fn side_efficiency(&self, side: Side) -> f64 {
        let n = self.detectors_per_side;
        let bank = &self.spcm_efficiencies[side.index() * n..(side.index() + 1) * n];
        self.optical_transmission(side) * bank.iter().sum::<f64>() / n as f64
    }

    /// Sends one photon through the chain; the bank splits equally among its
    /// detectors. Always consumes three draws, so runs that differ only in
    /// efficiencies stay on the same random stream.
    pub fn deliver<R: Rng>(&self, side: Side, rng: &mut R) -> Delivery {
        let optical = rng.random::<f64>();
        let id = side.index() * self.detectors_per_side + rng.random_range(0..self.detectors_per_side);
        let counted = rng.random::<f64>();
        if optical < self.optical_transmission(side) && counted < self.spcm_efficiencies[id] {
            Delivery::Click { detector: id }
        } else {
            Delivery::Lost
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nominal_chain_efficiency() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = DetectionChain::nominal(&mut rng);
        c.validate().unwrap();
        let e = c.side_efficiency(Side::Left);
        let lo = 0.9f64.sqrt() * 0.97 * 0.615 * 0.55;
        let hi = 0.9f64.sqrt() * 0.97 * 0.615 * 0.60;
        assert!(e >= lo && e <= hi, "{e}");
    }

    #[test]
    fn delivery_matches_efficiency() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut c = DetectionChain::nominal(&mut rng);
        c.defect_loss = Some([0.0, 0.3]);
        let n = 200_000;
        for side in [Side::Left, Side::Right] {
            let clicks = (0..n).filter(|_| matches!(c.deliver(side, &mut rng), Delivery::Click { .. })).count();
            let p = c.side_efficiency(side);
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!((clicks as f64 / n as f64 - p).abs() < 4.0 * sigma);
        }
    }

    #[test]
    fn rejects_wrong_detector_count() {
        let mut c = DetectionChain::ideal();
        c.spcm_efficiencies.pop();
        assert!(c.validate().is_err());
    }
}
