use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat-top pulse with `sin²` rising and falling edges, normalized so that
/// `∫ ξ(t)² dt = 1` over `[0, duration]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    pub duration: f64,
    pub edge: f64,
}

pub const DEFAULT_EDGE_NS: f64 = 2.0;

// ∫_0^x sin⁴ u du
fn sin4_integral(x: f64) -> f64 {
    3.0 * x / 8.0 - (2.0 * x).sin() / 4.0 + (4.0 * x).sin() / 32.0
}

impl PulseShape {
    pub fn new(duration: f64, edge: f64) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::InvalidParams(format!("pulse duration must be positive, got {duration}")));
        }
        if !(edge >= 0.0) || 2.0 * edge > duration {
            return Err(Error::InvalidParams(format!(
                "pulse edge {edge} ns must be non-negative and at most half of the duration {duration} ns"
            )));
        }
        Ok(Self { duration, edge })
    }

    pub fn with_default_edge(duration: f64) -> Result<Self> {
        Self::new(duration, DEFAULT_EDGE_NS.min(duration / 2.0))
    }

    fn raw(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= self.duration {
            return 0.0;
        }
        let e = self.edge;
        if e > 0.0 && t < e {
            (PI * t / (2.0 * e)).sin().powi(2)
        } else if e > 0.0 && t > self.duration - e {
            (PI * (self.duration - t) / (2.0 * e)).sin().powi(2)
        } else {
            1.0
        }
    }

    // ∫_0^t raw² over one edge ramp of length e
    fn ramp_energy(&self, t: f64) -> f64 {
        let e = self.edge;
        if e == 0.0 {
            return 0.0;
        }
        2.0 * e / PI * sin4_integral(PI * t / (2.0 * e))
    }

    fn raw_energy(&self) -> f64 {
        self.duration - 2.0 * self.edge + 2.0 * self.ramp_energy(self.edge)
    }

    /// Normalized field amplitude at time `t` after the pulse start.
    pub fn amplitude(&self, t: f64) -> f64 {
        self.raw(t) / self.raw_energy().sqrt()
    }

    /// `∫_0^t ξ²`, in `[0, 1]`.
    pub fn cumulative(&self, t: f64) -> f64 {
        let (d, e) = (self.duration, self.edge);
        let raw = if t <= 0.0 {
            0.0
        } else if t >= d {
            self.raw_energy()
        } else if t < e {
            self.ramp_energy(t)
        } else if t <= d - e {
            self.ramp_energy(e) + (t - e)
        } else {
            self.raw_energy() - self.ramp_energy(d - t)
        };
        (raw / self.raw_energy()).clamp(0.0, 1.0)
    }

    /// Times at which the envelope is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v = vec![0.0, self.edge, self.duration - self.edge, self.duration];
        v.dedup();
        v
    }

    /// Coupling of a two-level source that emits exactly this temporal mode:
    /// `ξ(t)/√(1 − ∫_0^t ξ²)`, cut once the source is empty.
    pub fn source_coupling(&self, t: f64) -> f64 {
        let rem = 1.0 - self.cumulative(t);
        if rem < 1e-10 {
            0.0
        } else {
            self.amplitude(t) / rem.sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_and_cumulative_agree() {
        let p = PulseShape::new(50.0, 2.0).unwrap();
        let n = 200_000;
        let dt = p.duration / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let t = (i as f64 + 0.5) * dt;
            acc += p.amplitude(t).powi(2) * dt;
            if i % 10_000 == 0 {
                assert!((acc - p.cumulative(t + 0.5 * dt)).abs() < 1e-6);
            }
        }
        assert!((acc - 1.0).abs() < 1e-8);
        assert_eq!(p.cumulative(60.0), 1.0);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(PulseShape::new(0.0, 0.0).is_err());
        assert!(PulseShape::new(3.0, 2.0).is_err());
        assert!(PulseShape::new(10.0, 0.0).is_ok());
    }
}
